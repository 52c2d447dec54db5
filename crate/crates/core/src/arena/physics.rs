//! Episode state and the per-frame world update.
//!
//! The world is 2.5D: the agent is a circle on the ground plane with an
//! elevation that only changes by walking up ramps, stepping onto low
//! surfaces or dropping off edges. Every frame runs in a fixed number of
//! sub-steps in a fixed order using `f64`, so a given `(spec, seed, motor
//! sequence)` always yields the same trajectory.

use serde::{Deserialize, Serialize};

use super::geometry::{Obb, Vec2, Vec3};
use super::spec::{ArenaSpec, ObjectKind, AGENT_DIAMETER, AGENT_RADIUS};
use super::ArenaError;

/// One low-level input frame: move one step and/or rotate by a fixed quantum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotorFrame {
    /// -1 backward, 0 still, +1 forward.
    pub forward: i8,
    /// Signed rotation in degrees; the action language only emits -6, 0 or 6.
    pub rotate: i8,
}

impl MotorFrame {
    pub const IDLE: MotorFrame = MotorFrame { forward: 0, rotate: 0 };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    /// Ground distance covered by one forward frame.
    pub step_length: f64,
    /// Reward change per unit of sphere diameter.
    pub reward_per_diameter: f64,
    /// Cumulative reward at which health reads zero.
    pub reward_ref: f64,
    /// Ratio of agent speed to block speed while pushing.
    pub block_mass_factor: f64,
    /// Fraction of a full step the agent must have moved on the previous
    /// frame to set a resting block in motion.
    pub push_speed_threshold: f64,
    /// Largest rise the agent can step onto without a ramp.
    pub climb_tolerance: f64,
    pub substeps: u32,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            step_length: 40.0 / 35.0,
            reward_per_diameter: 1.0,
            reward_ref: 1.0,
            block_mass_factor: 2.0,
            push_speed_threshold: 0.9,
            climb_tolerance: 0.3,
            substeps: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Running,
    GoalReached,
    Died,
    TimedOut,
    BudgetExhausted,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Running => "running",
            Termination::GoalReached => "goal_reached",
            Termination::Died => "died",
            Termination::TimedOut => "timed_out",
            Termination::BudgetExhausted => "budget_exhausted",
        }
    }

    pub fn parse(s: &str) -> Option<Termination> {
        [
            Termination::Running,
            Termination::GoalReached,
            Termination::Died,
            Termination::TimedOut,
            Termination::BudgetExhausted,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
    }
}

/// Mutable part of one object, index-aligned with `ArenaSpec::objects`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub position: Vec3,
    pub collected: bool,
    /// Step index of the most recent frame that pushed this block.
    pub last_pushed: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub agent_pos: Vec3,
    pub agent_heading: i32,
    /// Displacement applied during the last frame.
    pub agent_velocity: Vec3,
    pub health: f64,
    pub cumulative_reward: f64,
    pub step: u32,
    pub terminated: Termination,
    pub objects: Vec<ObjectState>,
    pub rng_seed: u64,
}

impl EpisodeState {
    pub fn is_running(&self) -> bool {
        self.terminated == Termination::Running
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_heading(self.agent_heading as f64)
    }
}

pub fn health_for(cumulative_reward: f64, reward_ref: f64) -> f64 {
    (100.0 * (1.0 + cumulative_reward / reward_ref)).clamp(0.0, 100.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    Yellow,
    Green,
    Red,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StepEvent {
    CollectedGoal { object: usize, kind: GoalKind, value: f64 },
    EnteredDeathZone { object: usize },
    InHotZone,
    Collision,
    Pushed { block: usize },
}

impl StepEvent {
    pub fn reward_delta(&self) -> f64 {
        match self {
            StepEvent::CollectedGoal { value, .. } => *value,
            StepEvent::EnteredDeathZone { .. } => -1.0,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub events: Vec<StepEvent>,
    /// Per-step decay charged this frame (negative).
    pub time_decay: f64,
    pub reward_delta: f64,
    pub terminated_now: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SolidShape {
    Box,
    /// Surface rises linearly along the local `+z` axis.
    Ramp,
}

/// A piece of geometry the agent can collide with or stand on.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Solid {
    pub footprint: Obb,
    pub bottom: f64,
    pub top: f64,
    pub object: Option<usize>,
    shape: SolidShape,
}

impl Solid {
    pub fn is_ramp(&self) -> bool {
        self.shape == SolidShape::Ramp
    }

    /// Height of the upper surface at `p`, clamped to the footprint.
    pub fn height_at(&self, p: Vec2) -> f64 {
        match self.shape {
            SolidShape::Box => self.top,
            SolidShape::Ramp => {
                let l = self.footprint.to_local(p);
                let frac = (l.z + self.footprint.half_z) / (2.0 * self.footprint.half_z);
                self.bottom + (self.top - self.bottom) * frac.clamp(0.0, 1.0)
            }
        }
    }

    /// Surface height above `p`, if `p` is over this solid.
    fn surface_at(&self, p: Vec2) -> Option<f64> {
        self.footprint.contains(p).then(|| self.height_at(p))
    }
}

/// Thickness of tunnel side walls and roof.
const TUNNEL_SHELL: f64 = 0.3;

/// Expands the spec's objects into collision and support geometry.
pub(crate) fn solids(spec: &ArenaSpec, objects: &[ObjectState]) -> Vec<Solid> {
    let mut out = Vec::new();
    for (i, (obj, st)) in spec.objects.iter().zip(objects).enumerate() {
        if obj.kind.is_sphere() || obj.kind.is_zone() {
            continue;
        }
        let e = obj.extents();
        let base = st.position.y;
        let footprint = obj.footprint_at(st.position);
        match obj.kind {
            ObjectKind::Tunnel => {
                let t = TUNNEL_SHELL.min(e.x / 4.0);
                let side_offset = e.x / 2.0 - t / 2.0;
                for sign in [-1.0, 1.0] {
                    let c = footprint.to_world(Vec2::new(sign * side_offset, 0.0));
                    out.push(Solid {
                        footprint: Obb::new(c, t / 2.0, e.z / 2.0, obj.rotation),
                        bottom: base,
                        top: base + e.y,
                        object: Some(i),
                        shape: SolidShape::Box,
                    });
                }
                out.push(Solid {
                    footprint,
                    bottom: base + (e.y - TUNNEL_SHELL.min(e.y / 4.0)),
                    top: base + e.y,
                    object: Some(i),
                    shape: SolidShape::Box,
                });
            }
            ObjectKind::Ramp => out.push(Solid {
                footprint,
                bottom: base,
                top: base + e.y,
                object: Some(i),
                shape: SolidShape::Ramp,
            }),
            _ => out.push(Solid {
                footprint,
                bottom: base,
                top: base + e.y,
                object: Some(i),
                shape: SolidShape::Box,
            }),
        }
    }
    out
}

/// Deterministic world model for one task.
#[derive(Clone, Debug)]
pub struct Arena {
    spec: ArenaSpec,
    physics: PhysicsConfig,
}

impl Arena {
    pub fn new(spec: ArenaSpec, physics: PhysicsConfig) -> Self {
        Self { spec, physics }
    }

    pub fn spec(&self) -> &ArenaSpec {
        &self.spec
    }

    pub fn physics(&self) -> &PhysicsConfig {
        &self.physics
    }

    pub fn initial_state(&self, rng_seed: u64) -> EpisodeState {
        let mut state = EpisodeState {
            agent_pos: self.spec.agent_start.position,
            agent_heading: self.spec.agent_start.heading.rem_euclid(360),
            agent_velocity: Vec3::ZERO,
            health: health_for(0.0, self.physics.reward_ref),
            cumulative_reward: 0.0,
            step: 0,
            terminated: Termination::Running,
            objects: self
                .spec
                .objects
                .iter()
                .map(|o| ObjectState {
                    position: o.position,
                    collected: false,
                    last_pushed: None,
                })
                .collect(),
            rng_seed,
        };
        let solids = solids(&self.spec, &state.objects);
        state.agent_pos.y = self.support_height(&solids, state.agent_pos.flat(), state.agent_pos.y);
        state
    }

    /// Force-ends a running episode because the agent ran out of scripts.
    pub fn exhaust_budget(&self, state: &EpisodeState) -> EpisodeState {
        let mut next = state.clone();
        if next.is_running() {
            next.terminated = Termination::BudgetExhausted;
        }
        next
    }

    fn support_height(&self, solids: &[Solid], p: Vec2, current: f64) -> f64 {
        let reach = current + self.physics.climb_tolerance;
        solids
            .iter()
            .filter_map(|s| s.surface_at(p))
            .filter(|h| *h <= reach)
            .fold(0.0, f64::max)
    }

    /// Highest surface under `p` regardless of reach; used to reject moves
    /// that would climb a ramp from the side.
    fn highest_surface(&self, solids: &[Solid], p: Vec2) -> f64 {
        solids
            .iter()
            .filter(|s| s.shape == SolidShape::Ramp)
            .filter_map(|s| s.surface_at(p))
            .fold(0.0, f64::max)
    }

    fn blocks_agent(&self, s: &Solid, feet: f64) -> bool {
        s.shape == SolidShape::Box
            && s.top > feet + self.physics.climb_tolerance
            && s.bottom < feet + AGENT_DIAMETER
    }

    /// Advances the world by one frame.
    pub fn step(
        &self,
        state: &EpisodeState,
        motor: MotorFrame,
    ) -> Result<(EpisodeState, StepOutcome), ArenaError> {
        if !state.is_running() {
            return Err(ArenaError::InvalidState(format!(
                "episode already ended ({})",
                state.terminated.as_str()
            )));
        }
        let spec = &self.spec;
        let cfg = &self.physics;
        let mut next = state.clone();
        let mut events = Vec::new();
        let mut ended: Option<Termination> = None;

        next.agent_heading = (next.agent_heading + motor.rotate as i32).rem_euclid(360);

        let start = next.agent_pos;
        if motor.forward != 0 {
            let dir = next.forward() * (motor.forward.signum() as f64);
            let total = dir * cfg.step_length;
            let n = cfg.substeps.max(1);
            let sub = total * (1.0 / n as f64);
            let prev_speed = Vec2::new(state.agent_velocity.x, state.agent_velocity.z).length();
            let mut collided = false;
            for _ in 0..n {
                let moved = self.substep(&mut next, sub, prev_speed, &mut events, &mut collided);
                self.contacts(&mut next, &mut events, &mut ended);
                if ended.is_some() || !moved {
                    break;
                }
            }
            if collided {
                events.push(StepEvent::Collision);
            }
        } else {
            self.contacts(&mut next, &mut events, &mut ended);
        }
        next.agent_velocity = next.agent_pos - start;
        self.settle_spheres(&mut next);

        let decay_rate = -1.0 / spec.time_limit as f64;
        let in_hot = spec.objects.iter().any(|o| {
            o.kind == ObjectKind::HotZone
                && next.agent_pos.y < cfg.climb_tolerance
                && o.footprint().contains(next.agent_pos.flat())
        });
        if in_hot {
            events.push(StepEvent::InHotZone);
        }
        let time_decay = if in_hot { 2.0 * decay_rate } else { decay_rate };
        let reward_delta = events.iter().map(StepEvent::reward_delta).sum::<f64>() + time_decay;
        next.cumulative_reward += reward_delta;
        next.health = health_for(next.cumulative_reward, cfg.reward_ref);
        next.step += 1;

        if ended.is_none() && self.all_rewards_collected(&next) {
            ended = Some(Termination::GoalReached);
        }
        if ended.is_none() && next.step >= spec.time_limit {
            ended = Some(Termination::TimedOut);
        }
        if ended.is_none() && next.health <= 0.0 {
            ended = Some(Termination::Died);
        }
        if let Some(t) = ended {
            next.terminated = t;
        }
        let outcome = StepOutcome {
            events,
            time_decay,
            reward_delta,
            terminated_now: ended.is_some(),
        };
        Ok((next, outcome))
    }

    /// Moves the agent by `d` with collision resolution. Returns false when
    /// the agent could not move at all.
    fn substep(
        &self,
        state: &mut EpisodeState,
        d: Vec2,
        prev_speed: f64,
        events: &mut Vec<StepEvent>,
        collided: &mut bool,
    ) -> bool {
        let cfg = &self.physics;
        let feet = state.agent_pos.y;
        let origin = state.agent_pos.flat();
        let mut step = d;
        let mut candidate = origin + step;

        // Blocks set in motion by this move.
        let step_index = state.step;
        let mut solids = solids(&self.spec, &state.objects);
        let contact: Vec<usize> = solids
            .iter()
            .filter(|s| {
                s.object
                    .is_some_and(|i| self.spec.objects[i].kind == ObjectKind::PushableBlock)
                    && self.blocks_agent(s, feet)
                    && s.footprint.circle_push_out(candidate, AGENT_RADIUS).is_some()
            })
            .filter_map(|s| s.object)
            .collect();
        for block in contact {
            let engaged = state.objects[block]
                .last_pushed
                .is_some_and(|s| s + 1 >= step_index);
            let fast = prev_speed >= cfg.push_speed_threshold * cfg.step_length;
            if !(engaged || fast) {
                continue;
            }
            let slow = d * (1.0 / cfg.block_mass_factor);
            let obj = &self.spec.objects[block];
            let moved_pos = state.objects[block].position + Vec3::new(slow.x, 0.0, slow.z);
            let moved = obj.footprint_at(moved_pos);
            let size = self.spec.size;
            let in_bounds = moved
                .corners()
                .iter()
                .all(|c| c.x >= 0.0 && c.x <= size && c.z >= 0.0 && c.z <= size);
            let free = in_bounds
                && solids.iter().all(|s| {
                    s.object == Some(block)
                        || s.top <= moved_pos.y + 1e-9
                        || s.bottom >= moved_pos.y + obj.extents().y
                        || !s.footprint.overlaps(&moved)
                });
            if free {
                state.objects[block].position = moved_pos;
                state.objects[block].last_pushed = Some(step_index);
                if !events.contains(&StepEvent::Pushed { block }) {
                    events.push(StepEvent::Pushed { block });
                }
                step = slow;
                candidate = origin + step;
                solids = super::physics::solids(&self.spec, &state.objects);
            }
        }

        // Ramps cannot be climbed from the side.
        if self.highest_surface(&solids, candidate) > feet + cfg.climb_tolerance {
            *collided = true;
            return false;
        }

        let blocking: Vec<&Solid> = solids.iter().filter(|s| self.blocks_agent(s, feet)).collect();
        let lo = AGENT_RADIUS;
        let hi = self.spec.size - AGENT_RADIUS;
        for _ in 0..4 {
            let mut any = false;
            for s in &blocking {
                if let Some(push) = s.footprint.circle_push_out(candidate, AGENT_RADIUS) {
                    candidate = candidate + push;
                    any = true;
                }
            }
            let clamped = Vec2::new(candidate.x.clamp(lo, hi), candidate.z.clamp(lo, hi));
            if clamped != candidate {
                candidate = clamped;
                any = true;
            }
            if any {
                *collided = true;
            } else {
                break;
            }
        }
        let penetrating = blocking
            .iter()
            .any(|s| s.footprint.distance(candidate) < AGENT_RADIUS - 1e-6);
        if penetrating {
            candidate = origin;
        }
        let moved = candidate != origin;
        state.agent_pos.x = candidate.x;
        state.agent_pos.z = candidate.z;
        state.agent_pos.y = self.support_height(&solids, candidate, feet);
        moved
    }

    fn contacts(
        &self,
        state: &mut EpisodeState,
        events: &mut Vec<StepEvent>,
        ended: &mut Option<Termination>,
    ) {
        if ended.is_some() {
            return;
        }
        let cfg = &self.physics;
        let agent_center = state.agent_pos + Vec3::new(0.0, AGENT_RADIUS, 0.0);
        for (i, obj) in self.spec.objects.iter().enumerate() {
            let st = &state.objects[i];
            if st.collected {
                continue;
            }
            if obj.kind.is_sphere() {
                let d = obj.diameter();
                let center = st.position + Vec3::new(0.0, d / 2.0, 0.0);
                if (center - agent_center).length() > (AGENT_DIAMETER + d) / 2.0 {
                    continue;
                }
                let (kind, sign, end) = match obj.kind {
                    ObjectKind::YellowGoal => (GoalKind::Yellow, 1.0, None),
                    ObjectKind::GreenGoal => (GoalKind::Green, 1.0, Some(Termination::GoalReached)),
                    _ => (GoalKind::Red, -1.0, Some(Termination::Died)),
                };
                state.objects[i].collected = true;
                events.push(StepEvent::CollectedGoal {
                    object: i,
                    kind,
                    value: sign * d * cfg.reward_per_diameter,
                });
                if end.is_some() {
                    *ended = end;
                    return;
                }
            } else if obj.kind == ObjectKind::DeathZone
                && state.agent_pos.y < cfg.climb_tolerance
                && obj.footprint().distance(state.agent_pos.flat()) < AGENT_RADIUS
            {
                events.push(StepEvent::EnteredDeathZone { object: i });
                *ended = Some(Termination::Died);
                return;
            }
        }
    }

    /// Drops spheres whose support was pushed away.
    fn settle_spheres(&self, state: &mut EpisodeState) {
        if !state.objects.iter().any(|o| o.last_pushed == Some(state.step)) {
            return;
        }
        let solids = solids(&self.spec, &state.objects);
        for (i, obj) in self.spec.objects.iter().enumerate() {
            if !obj.kind.is_sphere() || state.objects[i].collected {
                continue;
            }
            let p = state.objects[i].position;
            if p.y <= 0.0 {
                continue;
            }
            let support = solids
                .iter()
                .filter_map(|s| s.surface_at(p.flat()))
                .filter(|h| *h <= p.y + 1e-9)
                .fold(0.0, f64::max);
            state.objects[i].position.y = support.min(p.y);
        }
    }

    /// True when the task has no green goal and every yellow goal is taken.
    fn all_rewards_collected(&self, state: &EpisodeState) -> bool {
        let mut yellow = 0;
        for (obj, st) in self.spec.objects.iter().zip(&state.objects) {
            match obj.kind {
                ObjectKind::GreenGoal => return false,
                ObjectKind::YellowGoal => {
                    if !st.collected {
                        return false;
                    }
                    yellow += 1;
                }
                _ => {}
            }
        }
        yellow > 0
    }
}

/// `step` with the default physics configuration.
pub fn step(
    state: &EpisodeState,
    motor: MotorFrame,
    spec: &ArenaSpec,
) -> Result<(EpisodeState, StepOutcome), ArenaError> {
    Arena::new(spec.clone(), PhysicsConfig::default()).step(state, motor)
}

/// A trial passes when the final cumulative reward reaches the pass mark.
pub fn check_pass(state: &EpisodeState, spec: &ArenaSpec) -> bool {
    state.cumulative_reward >= spec.pass_mark
}
