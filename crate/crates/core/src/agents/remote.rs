use std::io::{BufRead, Write};

use super::Agent;
use crate::protocol::{decode_line, encode_line, Envelope, Message};

/// Drives an in-process agent from the agent side of the wire: reads
/// records from `input`, answers every observation with one action on
/// `output`, and returns when the harness closes the stream. An agent
/// that declines to answer simply stays silent.
pub fn run_agent_loop<R: BufRead, W: Write>(
    agent: &mut dyn Agent,
    input: R,
    mut output: W,
) -> std::io::Result<()> {
    let mut seq = 0u64;
    let mut fresh = true;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let env = decode_line(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.0))?;
        match env.body {
            Message::Observation(obs) => {
                if fresh {
                    agent.begin_episode(&obs.task_id);
                    fresh = false;
                }
                if let Some(text) = agent.respond(&obs, None) {
                    seq += 1;
                    let reply = Envelope {
                        session_id: env.session_id,
                        seq,
                        body: Message::Action {
                            raw_script_text: text,
                        },
                    };
                    output.write_all(encode_line(&reply).as_bytes())?;
                    output.flush()?;
                }
            }
            Message::ParseFeedback { error, .. } => agent.on_feedback(&error),
            Message::EpisodeEnd { .. } => fresh = true,
            Message::Abort { reason } => {
                fresh = true;
                if reason == "framing" {
                    break;
                }
            }
            Message::SessionHello { .. } | Message::Action { .. } => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::MockLlm;
    use crate::protocol::ObservationMsg;

    #[test]
    fn answers_each_observation_once() {
        let obs = ObservationMsg {
            task_id: "t".into(),
            image_b64: String::new(),
            image_sha256: String::new(),
            width: 16,
            height: 16,
            image_count: 1,
            blackout: false,
            health: 100.0,
            cumulative_reward: 0.0,
            step: 0,
            scripts_remaining: 30,
            text_prompt: String::new(),
            context_images: Vec::new(),
        };
        let lines: String = (1..=2)
            .map(|seq| {
                encode_line(&Envelope {
                    session_id: "s".into(),
                    seq,
                    body: Message::Observation(obs.clone()),
                })
            })
            .collect();
        let mut agent = MockLlm::new(vec!["Go(1);".into(), "Turn(6);".into()]);
        let mut out = Vec::new();
        run_agent_loop(&mut agent, lines.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "{\"session_id\":\"s\",\"seq\":1,\"type\":\"action\",\"raw_script_text\":\"Go(1);\"}\n\
             {\"session_id\":\"s\",\"seq\":2,\"type\":\"action\",\"raw_script_text\":\"Turn(6);\"}\n"
        );
    }
}
