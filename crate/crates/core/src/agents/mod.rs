//! Reference agents used to validate the harness.

mod oracle;
mod random;
mod remote;
mod scripted;

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::protocol::{ObservationMsg, TurnContext};

pub use oracle::{greedy_policy, GreedyOracle, OraclePlan};
pub use random::{random_policy, RandomAgent, RANDOM_ARMS};
pub use remote::run_agent_loop;
pub use scripted::{MockLlm, ReplayAgent};

/// An agent living in the harness process.
pub trait Agent: Send {
    fn id(&self) -> String;

    /// Called before the first observation of every episode.
    fn begin_episode(&mut self, _task_id: &str) {}

    /// Returns the raw reply to one observation, or `None` to simulate an
    /// agent that never answers.
    fn respond(&mut self, obs: &ObservationMsg, ctx: Option<&TurnContext>) -> Option<String>;

    fn on_feedback(&mut self, _error: &str) {}
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn begin_episode(&mut self, task_id: &str) {
        (**self).begin_episode(task_id)
    }
    fn respond(&mut self, obs: &ObservationMsg, ctx: Option<&TurnContext>) -> Option<String> {
        (**self).respond(obs, ctx)
    }
    fn on_feedback(&mut self, error: &str) {
        (**self).on_feedback(error)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentBehavior {
    Random { seed: u64 },
    GreedyOracle { replan_every: u32 },
    Replay { transcript_ref: PathBuf },
    Mock { responses: Vec<String> },
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("unknown agent `{0}`; expected random, oracle, replay:<file> or mock:<file>")]
    Unknown(String),
    #[error("cannot load agent data from {path}: {message}")]
    Load { path: String, message: String },
}

impl AgentBehavior {
    /// Parses the command-line form `random|oracle|replay:<file>|mock:<file>`.
    /// The seed of `random` is filled in per trial by the suite scheduler.
    pub fn parse(spec: &str) -> Result<AgentBehavior, AgentError> {
        match spec.split_once(':') {
            None if spec == "random" => Ok(AgentBehavior::Random { seed: 0 }),
            None if spec == "oracle" => Ok(AgentBehavior::GreedyOracle { replan_every: 1 }),
            Some(("replay", path)) => Ok(AgentBehavior::Replay {
                transcript_ref: PathBuf::from(path),
            }),
            Some(("mock", path)) => Ok(AgentBehavior::Mock {
                responses: scripted::load_responses(std::path::Path::new(path))?,
            }),
            _ => Err(AgentError::Unknown(spec.to_string())),
        }
    }

    pub fn with_seed(&self, seed: u64) -> AgentBehavior {
        match self {
            AgentBehavior::Random { .. } => AgentBehavior::Random { seed },
            other => other.clone(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Agent>, AgentError> {
        Ok(match self {
            AgentBehavior::Random { seed } => Box::new(RandomAgent::new(*seed)),
            AgentBehavior::GreedyOracle { replan_every } => {
                Box::new(GreedyOracle::new(*replan_every))
            }
            AgentBehavior::Replay { transcript_ref } => Box::new(ReplayAgent::load(transcript_ref)?),
            AgentBehavior::Mock { responses } => Box::new(MockLlm::new(responses.clone())),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            AgentBehavior::Random { .. } => "random",
            AgentBehavior::GreedyOracle { .. } => "oracle",
            AgentBehavior::Replay { .. } => "replay",
            AgentBehavior::Mock { .. } => "mock",
        }
    }
}
