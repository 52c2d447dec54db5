use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Agent;
use crate::dsl::{Command, Script};
use crate::protocol::{ObservationMsg, TurnContext};

/// The actions the random agent picks from, uniformly.
pub const RANDOM_ARMS: [Command; 17] = [
    Command::Turn(30),
    Command::Turn(-30),
    Command::Turn(90),
    Command::Turn(-90),
    Command::Go(3),
    Command::Go(4),
    Command::Go(5),
    Command::Go(6),
    Command::Go(7),
    Command::Go(8),
    Command::Go(9),
    Command::Go(10),
    Command::Go(11),
    Command::Go(12),
    Command::Go(13),
    Command::Go(14),
    Command::Go(15),
];

/// The script the random agent sends on a given turn. Each turn draws from
/// its own stream so the choice depends only on `(seed, turn)`.
pub fn random_policy(seed: u64, turn: u64) -> Script {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(turn);
    let arm = RANDOM_ARMS[rng.gen_range(0..RANDOM_ARMS.len())].clone();
    Script::from_commands(vec![arm])
}

pub struct RandomAgent {
    seed: u64,
    turn: u64,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        Self { seed, turn: 0 }
    }
}

impl Agent for RandomAgent {
    fn id(&self) -> String {
        "random".into()
    }

    fn begin_episode(&mut self, _task_id: &str) {
        self.turn = 0;
    }

    fn respond(&mut self, _obs: &ObservationMsg, _ctx: Option<&TurnContext>) -> Option<String> {
        let script = random_policy(self.seed, self.turn);
        self.turn += 1;
        Some(script.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_reproducible() {
        let a: Vec<String> = (0..50).map(|t| random_policy(7, t).to_string()).collect();
        let b: Vec<String> = (0..50).map(|t| random_policy(7, t).to_string()).collect();
        assert_eq!(a, b);
        let c: Vec<String> = (0..50).map(|t| random_policy(8, t).to_string()).collect();
        assert_ne!(a, c);
        assert_eq!(random_policy(0, 0), random_policy(0, 0));
    }

    #[test]
    fn arms_are_uniform() {
        let n = 10_000u64;
        let mut counts = [0u32; 17];
        for t in 0..n {
            let cmd = &random_policy(12345, t).commands[0];
            let i = RANDOM_ARMS.iter().position(|a| a == cmd).unwrap();
            counts[i] += 1;
        }
        let expected = 1.0 / 17.0;
        for c in counts {
            let p = c as f64 / n as f64;
            assert!((p - expected).abs() <= 0.03, "arm frequency {p}");
        }
    }
}
