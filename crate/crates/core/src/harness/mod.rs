//! Experiment orchestration: prompts, conversation history, the episode
//! loop, suite scheduling and the bundled task pack.

mod episode;
mod import;
mod pack;
mod prompt;
mod suite;

pub use episode::{run_episode, EpisodeConfig, EpisodeResult};
pub use import::import_aai_yaml;
pub use pack::{TaskPack, TUTORIAL_ID};
pub use prompt::{
    build_prompt, corrective_prompt, health_line, tutorial_response_list, turn_parts,
    ConversationHistory, IclExample, PromptMode, PromptPart, PromptPayload, PromptTemplate,
    BASE_PROMPT, CORRECTIVE_PROMPT, CORRECTIVE_PROMPT_VERSION, HEALTH_LINE_PREFIX, INITIAL_IMAGES,
    TUTORIAL_RESPONSES,
};
pub use suite::{
    run_suite, schedule, transcript_path, trial_seed, BuiltinFactory, ConnectedFactory,
    ProcessFactory, RelaunchEvent, SessionFactory, SuiteConfig, SuiteOutcome, TcpFactory, TrialKey,
    ICL_LEVELS,
};

use crate::arena::ArenaError;
use crate::protocol::SessionError;
use crate::render::ImageError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("task {task}: {message}")]
    Task { task: String, message: String },
    #[error("missing resource: {0}")]
    ResourceMissing(String),
    #[error("invalid suite configuration: {0}")]
    Config(String),
    #[error("agent: {0}")]
    Agent(String),
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error("cannot import task: {0}")]
    Import(String),
    #[error("i/o error: {0}")]
    Io(String),
}
