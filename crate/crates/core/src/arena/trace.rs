use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use super::geometry::Vec3;
use super::physics::{EpisodeState, GoalKind, StepEvent, StepOutcome, Termination};

/// Resolution at which floating-point values enter the digest. Coarser than
/// the last bits of transcendental functions so that platform libm
/// differences do not change the hash.
const QUANTUM: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TraceDigest(pub String);

impl fmt::Display for TraceDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Streaming digest over an episode's `(state, outcome)` sequence.
#[derive(Clone)]
pub struct TraceHasher {
    inner: Sha256,
    frames: u64,
}

impl Default for TraceHasher {
    fn default() -> Self {
        Self::new()
    }
}

impl TraceHasher {
    pub fn new() -> Self {
        let mut inner = Sha256::new();
        inner.update(b"arenabench-trace-v1");
        Self { inner, frames: 0 }
    }

    fn f(&mut self, v: f64) {
        let q = (v / QUANTUM).round() as i64;
        self.inner.update(q.to_le_bytes());
    }

    fn v3(&mut self, v: Vec3) {
        self.f(v.x);
        self.f(v.y);
        self.f(v.z);
    }

    fn state(&mut self, s: &EpisodeState) {
        self.v3(s.agent_pos);
        self.inner.update(s.agent_heading.to_le_bytes());
        self.v3(s.agent_velocity);
        self.f(s.health);
        self.f(s.cumulative_reward);
        self.inner.update(s.step.to_le_bytes());
        self.inner.update([termination_tag(s.terminated)]);
        self.inner.update((s.objects.len() as u64).to_le_bytes());
        for o in &s.objects {
            self.v3(o.position);
            self.inner.update([o.collected as u8]);
        }
        self.inner.update(s.rng_seed.to_le_bytes());
    }

    pub fn absorb_initial(&mut self, state: &EpisodeState) {
        self.inner.update(b"I");
        self.state(state);
    }

    pub fn absorb(&mut self, state: &EpisodeState, outcome: &StepOutcome) {
        self.frames += 1;
        self.inner.update(b"S");
        self.state(state);
        self.inner.update((outcome.events.len() as u64).to_le_bytes());
        for e in &outcome.events {
            match e {
                StepEvent::CollectedGoal { object, kind, value } => {
                    self.inner.update([1, goal_tag(*kind)]);
                    self.inner.update((*object as u64).to_le_bytes());
                    self.f(*value);
                }
                StepEvent::EnteredDeathZone { object } => {
                    self.inner.update([2]);
                    self.inner.update((*object as u64).to_le_bytes());
                }
                StepEvent::InHotZone => self.inner.update([3]),
                StepEvent::Collision => self.inner.update([4]),
                StepEvent::Pushed { block } => {
                    self.inner.update([5]);
                    self.inner.update((*block as u64).to_le_bytes());
                }
            }
        }
        self.f(outcome.time_decay);
        self.f(outcome.reward_delta);
        self.inner.update([outcome.terminated_now as u8]);
    }

    /// Marks the end of the episode; covers terminations that happen
    /// between frames, such as running out of scripts.
    pub fn absorb_final(&mut self, state: &EpisodeState) {
        self.inner.update(b"F");
        self.state(state);
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn finish(self) -> TraceDigest {
        TraceDigest(hex::encode(self.inner.finalize()))
    }
}

fn termination_tag(t: Termination) -> u8 {
    match t {
        Termination::Running => 0,
        Termination::GoalReached => 1,
        Termination::Died => 2,
        Termination::TimedOut => 3,
        Termination::BudgetExhausted => 4,
    }
}

fn goal_tag(k: GoalKind) -> u8 {
    match k {
        GoalKind::Yellow => 0,
        GoalKind::Green => 1,
        GoalKind::Red => 2,
    }
}

/// Digest of a complete recorded episode.
pub fn trace_hash<'a>(
    initial: &EpisodeState,
    frames: impl IntoIterator<Item = (&'a EpisodeState, &'a StepOutcome)>,
) -> TraceDigest {
    let mut h = TraceHasher::new();
    h.absorb_initial(initial);
    for (s, o) in frames {
        h.absorb(s, o);
    }
    h.finish()
}
