//! Embodied evaluation of language agents in a walled arena.
//!
//! The crate is organised bottom-up:
//!
//! * [`arena`] is the deterministic world: task files, kinematics, rewards.
//! * [`dsl`] parses agent replies (`Think`/`Go`/`Turn`) into motor frames.
//! * [`render`] draws the first-person and overhead observations.
//! * [`protocol`] is the newline-delimited wire format and session logic
//!   shared by in-process and external agents.
//! * [`agents`] holds the reference agents used to validate the harness.
//! * [`harness`] builds prompts, runs episodes and schedules suites.
//! * [`stats`] aggregates trial records into per-level summaries.

pub mod agents;
pub mod arena;
pub mod dsl;
pub mod harness;
pub mod protocol;
pub mod render;
pub mod stats;
