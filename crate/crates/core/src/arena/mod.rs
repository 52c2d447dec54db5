//! Arena world model: task descriptions, the deterministic per-frame update,
//! the reward ledger and episode termination.

mod format;
pub mod geometry;
mod physics;
mod spec;
mod trace;

use thiserror::Error;

pub use format::{load_arena, to_text, HEADER};
pub use geometry::{Obb, Vec2, Vec3};
pub use physics::{
    check_pass, health_for, step, Arena, EpisodeState, GoalKind, MotorFrame, ObjectState,
    PhysicsConfig, StepEvent, StepOutcome, Termination,
};
pub(crate) use physics::solids;
pub use spec::{
    level_from_task_id, AgentStart, ArenaSpec, Blackout, ObjectKind, ObjectSize, ObjectSpec,
    Opacity, Rgb, Surface, AGENT_DIAMETER, AGENT_RADIUS, DEFAULT_ARENA_SIZE,
};
pub use trace::{trace_hash, TraceDigest, TraceHasher};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArenaError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid arena: {0}")]
    Validation(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}
