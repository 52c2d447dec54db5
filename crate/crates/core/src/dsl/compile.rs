use serde::{Deserialize, Serialize};

use super::parse::{Command, Script, MAX_TURN_DEGREES};
use crate::arena::MotorFrame;

/// Smallest rotation the agent can perform in one frame.
pub const TURN_QUANTUM: i32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    /// Ground distance per `Go` unit. 40/35 lets `Go(35)` span the 40-unit
    /// arena, which folds the momentum overshoot into a constant.
    pub step_length: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            step_length: 40.0 / 35.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("turn of {0} degrees is outside [-360, 360]")]
pub struct OutOfRange(pub i32);

/// Rounds the magnitude of a turn down to a multiple of six degrees,
/// keeping its sign, so left and right turns behave symmetrically.
pub fn quantize_turn(degrees: i32) -> Result<i32, OutOfRange> {
    if degrees.abs() > MAX_TURN_DEGREES {
        return Err(OutOfRange(degrees));
    }
    Ok(degrees.signum() * TURN_QUANTUM * (degrees.abs() / TURN_QUANTUM))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotorPlan {
    pub frames: Vec<MotorFrame>,
    /// `Think` texts in source order; they have no effect on the world.
    pub thoughts: Vec<String>,
}

impl MotorPlan {
    /// Net commanded rotation in degrees.
    pub fn total_rotation(&self) -> i32 {
        self.frames.iter().map(|f| f.rotate as i32).sum()
    }

    /// Net commanded travel along the agent's heading.
    pub fn displacement(&self, cfg: &MotionConfig) -> f64 {
        let steps: i32 = self.frames.iter().map(|f| f.forward as i32).sum();
        steps as f64 * cfg.step_length
    }

    pub fn summary(&self, cfg: &MotionConfig) -> String {
        let moves = self.frames.iter().filter(|f| f.forward != 0).count();
        let turns = self.frames.len() - moves;
        format!(
            "{} frames ({} move, {} turn), displacement {:.4} units, rotation {} deg, {} thought(s)",
            self.frames.len(),
            moves,
            turns,
            self.displacement(cfg),
            self.total_rotation(),
            self.thoughts.len()
        )
    }
}

/// Expands a parsed script into one motor frame per environment step.
pub fn compile(script: &Script, _cfg: &MotionConfig) -> MotorPlan {
    let mut plan = MotorPlan::default();
    for cmd in &script.commands {
        match cmd {
            Command::Think(text) => plan.thoughts.push(text.clone()),
            Command::Go(n) => {
                let frame = MotorFrame {
                    forward: n.signum() as i8,
                    rotate: 0,
                };
                plan.frames.extend(std::iter::repeat(frame).take(n.unsigned_abs() as usize));
            }
            Command::Turn(d) => {
                // Parsing guarantees the range.
                let q = quantize_turn(*d).unwrap_or(0);
                let frame = MotorFrame {
                    forward: 0,
                    rotate: (q.signum() * TURN_QUANTUM) as i8,
                };
                plan.frames
                    .extend(std::iter::repeat(frame).take((q.abs() / TURN_QUANTUM) as usize));
            }
        }
    }
    plan
}
