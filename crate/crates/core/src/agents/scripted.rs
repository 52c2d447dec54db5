use std::path::Path;

use super::{Agent, AgentError};
use crate::protocol::{ObservationMsg, Transcript, TurnContext};

/// Reads canned responses: either a JSON array of strings or one response
/// per non-empty line.
pub(super) fn load_responses(path: &Path) -> Result<Vec<String>, AgentError> {
    let text = std::fs::read_to_string(path).map_err(|e| AgentError::Load {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(MockLlm::parse_responses(&text))
}

/// Plays back a fixed list of responses, one per observation, restarting
/// at the top of every episode.
pub struct MockLlm {
    responses: Vec<String>,
    cursor: usize,
}

impl MockLlm {
    pub fn new(responses: Vec<String>) -> Self {
        Self {
            responses,
            cursor: 0,
        }
    }

    pub fn parse_responses(text: &str) -> Vec<String> {
        if text.trim_start().starts_with('[') {
            if let Ok(list) = serde_json::from_str::<Vec<String>>(text) {
                return list;
            }
        }
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect()
    }

    pub fn remaining(&self) -> usize {
        self.responses.len() - self.cursor
    }
}

impl Agent for MockLlm {
    fn id(&self) -> String {
        "mock".into()
    }

    fn begin_episode(&mut self, _task_id: &str) {
        self.cursor = 0;
    }

    fn respond(&mut self, _obs: &ObservationMsg, _ctx: Option<&TurnContext>) -> Option<String> {
        let r = self.responses.get(self.cursor).cloned();
        if r.is_some() {
            self.cursor += 1;
        }
        r
    }
}

/// Replays the agent side of a recorded transcript, timeouts included.
pub struct ReplayAgent {
    replies: Vec<Option<String>>,
    agent_id: String,
    cursor: usize,
}

impl ReplayAgent {
    pub fn new(transcript: &Transcript) -> Self {
        Self {
            replies: transcript.agent_replies(),
            agent_id: transcript.header.agent_id.clone(),
            cursor: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let t = Transcript::load(path).map_err(|e| AgentError::Load {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self::new(&t))
    }
}

impl Agent for ReplayAgent {
    fn id(&self) -> String {
        format!("replay:{}", self.agent_id)
    }

    fn begin_episode(&mut self, _task_id: &str) {
        self.cursor = 0;
    }

    fn respond(&mut self, _obs: &ObservationMsg, _ctx: Option<&TurnContext>) -> Option<String> {
        let r = self.replies.get(self.cursor).cloned().flatten();
        self.cursor += 1;
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_file_forms() {
        assert_eq!(
            MockLlm::parse_responses("[\"Go(1);\", \"Turn(6);\"]"),
            vec!["Go(1);", "Turn(6);"]
        );
        assert_eq!(MockLlm::parse_responses("Go(1);\n\n  Turn(6);\n"), vec!["Go(1);", "Turn(6);"]);
    }
}
