//! Wire protocol between the harness and an agent.
//!
//! Every record is one JSON object on its own line. The harness owns the
//! episode; the agent only ever answers an `observation` with an `action`.
//! Field names and framing are normative, see `docs/protocol.md` and
//! `docs/protocol.schema.json`.

mod link;
mod server;
mod session;
mod transcript;

use serde::{Deserialize, Serialize};
use std::time::Duration;

pub use link::{
    AgentLink, ChannelInbox, ChannelLink, ChannelPeer, ChildProcessLink, InProcessLink, LinkError, StreamLink, TurnContext,
};
pub use server::{serve, Endpoint, ServeError, ServerHandle};
pub use session::{Session, SessionError};
pub use transcript::{
    read_transcript, Direction, ReplayError, Transcript, TranscriptEntry, TranscriptFooter,
    TranscriptHeader, TranscriptWriter, TRANSCRIPT_VERSION,
};

pub const WIRE_VERSION: &str = "arenabench-wire/1";

/// Longest accepted line, in bytes. A 512x512 PNG is well under this.
pub const MAX_LINE_BYTES: usize = 8 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub session_id: String,
    pub seq: u64,
    #[serde(flatten)]
    pub body: Message,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    SessionHello {
        protocol: String,
        suite_id: String,
        config: serde_json::Value,
    },
    Observation(ObservationMsg),
    Action {
        raw_script_text: String,
    },
    ParseFeedback {
        error: String,
        retry_index: u32,
    },
    EpisodeEnd {
        passed: bool,
        final_reward: f64,
        reason: String,
    },
    Abort {
        reason: String,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::SessionHello { .. } => "session_hello",
            Message::Observation(_) => "observation",
            Message::Action { .. } => "action",
            Message::ParseFeedback { .. } => "parse_feedback",
            Message::EpisodeEnd { .. } => "episode_end",
            Message::Abort { .. } => "abort",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationMsg {
    pub task_id: String,
    /// Base64 PNG of the first-person view.
    pub image_b64: String,
    /// Hex SHA-256 of the PNG bytes.
    pub image_sha256: String,
    pub width: u32,
    pub height: u32,
    /// How many consecutive observations this image stands for. The first
    /// turn of an episode shows the initial view three times.
    pub image_count: u32,
    pub blackout: bool,
    pub health: f64,
    pub cumulative_reward: f64,
    pub step: u32,
    pub scripts_remaining: u32,
    pub text_prompt: String,
    /// Images referenced by `text_prompt` that were not sent on an earlier
    /// observation, such as the worked example's frames.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub context_images: Vec<ContextImage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextImage {
    pub label: String,
    pub image_sha256: String,
    pub image_b64: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionPolicy {
    pub max_scripts_per_episode: u32,
    pub max_agent_failures: u32,
    pub response_timeout_secs: f64,
}

impl Default for SessionPolicy {
    fn default() -> Self {
        Self {
            max_scripts_per_episode: 30,
            max_agent_failures: 3,
            response_timeout_secs: 120.0,
        }
    }
}

impl SessionPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_scripts_per_episode == 0 {
            return Err("max_scripts_per_episode must be positive".into());
        }
        if self.max_agent_failures == 0 {
            return Err("max_agent_failures must be positive".into());
        }
        if !(self.response_timeout_secs.is_finite() && self.response_timeout_secs > 0.0) {
            return Err("response_timeout_secs must be positive".into());
        }
        Ok(())
    }

    pub fn response_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.response_timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("framing error: {0}")]
pub struct FramingError(pub String);

/// Serialises one record, newline included.
pub fn encode_line(env: &Envelope) -> String {
    let mut s = serde_json::to_string(env).expect("envelopes always serialise");
    s.push('\n');
    s
}

pub fn decode_line(line: &str) -> Result<Envelope, FramingError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.len() > MAX_LINE_BYTES {
        return Err(FramingError("line too long".into()));
    }
    serde_json::from_str(line).map_err(|e| FramingError(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_wire_form_is_stable() {
        let env = Envelope {
            session_id: "s1".into(),
            seq: 4,
            body: Message::Action {
                raw_script_text: "Go(5);".into(),
            },
        };
        let line = encode_line(&env);
        assert_eq!(
            line,
            "{\"session_id\":\"s1\",\"seq\":4,\"type\":\"action\",\"raw_script_text\":\"Go(5);\"}\n"
        );
        assert_eq!(decode_line(&line).unwrap(), env);
    }

    #[test]
    fn malformed_lines_are_framing_errors() {
        assert!(decode_line("{not json").is_err());
        assert!(decode_line("{\"session_id\":\"s\",\"seq\":1,\"type\":\"dance\"}").is_err());
        assert!(decode_line("{\"session_id\":\"s\",\"seq\":1,\"type\":\"action\"}").is_err());
    }

    #[test]
    fn default_policy() {
        let p = SessionPolicy::default();
        assert_eq!(p.max_scripts_per_episode, 30);
        assert_eq!(p.max_agent_failures, 3);
        assert!(p.validate().is_ok());
        assert!(SessionPolicy {
            max_agent_failures: 0,
            ..p
        }
        .validate()
        .is_err());
    }
}
