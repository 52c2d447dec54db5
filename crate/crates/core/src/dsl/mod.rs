//! The agent scripting language: `Think('...')`, `Go(n)` and `Turn(d)`
//! commands, each terminated by `;`. See `docs/dsl.ebnf` for the grammar.

mod compile;
mod parse;

pub use compile::{compile, quantize_turn, MotionConfig, MotorPlan, OutOfRange, TURN_QUANTUM};
pub use parse::{
    parse, Command, Location, ParseError, ParseErrorKind, Script, MAX_GO_STEPS, MAX_TURN_DEGREES,
};
