//! Privileged-state navigator: plans a grid path around obstacles and
//! hazards to the best goal, then walks it one `Turn` or `Go` at a time.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Agent;
use crate::arena::geometry::angle_diff;
use crate::arena::{
    solids, ArenaSpec, EpisodeState, ObjectKind, Vec2, AGENT_RADIUS,
};
use crate::dsl::{Command, Script, MAX_GO_STEPS, TURN_QUANTUM};
use crate::protocol::{ObservationMsg, TurnContext};

const CELL: f64 = 0.5;
/// Clearance kept from solid obstacles, beyond the agent radius.
const SOLID_MARGIN: f64 = 0.15;
/// Clearance kept from hazards (death zones, red goals).
const HAZARD_MARGIN: f64 = 0.35;
/// Extra `Go` steps when approaching a goal so the agent passes through it.
const GOAL_MARGIN: i32 = 3;
/// Heights above this cannot be reached without ramps.
const GROUND_REACH: f64 = 0.3;

#[derive(Clone, Debug, PartialEq)]
pub struct OraclePlan {
    pub goal: usize,
    /// Waypoints after the agent's position, ending at the goal centre.
    pub waypoints: Vec<Vec2>,
}

struct World<'a> {
    spec: &'a ArenaSpec,
    solids: Vec<(crate::arena::Obb, f64, f64)>,
    hazards: Vec<Hazard>,
}

enum Hazard {
    Zone(crate::arena::Obb),
    Ball(Vec2, f64),
}

impl<'a> World<'a> {
    fn new(spec: &'a ArenaSpec, state: &EpisodeState) -> Self {
        let solids = solids(spec, &state.objects)
            .into_iter()
            .filter(|s| s.bottom < crate::arena::AGENT_DIAMETER && (s.is_ramp() || s.top > GROUND_REACH))
            .map(|s| (s.footprint, s.bottom, s.top))
            .collect();
        let mut hazards = Vec::new();
        for (obj, st) in spec.objects.iter().zip(&state.objects) {
            match obj.kind {
                ObjectKind::DeathZone => hazards.push(Hazard::Zone(obj.footprint_at(st.position))),
                ObjectKind::RedGoal if !st.collected && st.position.y < GROUND_REACH + 0.5 => {
                    hazards.push(Hazard::Ball(st.position.flat(), obj.diameter() / 2.0))
                }
                _ => {}
            }
        }
        Self {
            spec,
            solids,
            hazards,
        }
    }

    fn hazard_clear(&self, p: Vec2, margin: f64) -> bool {
        self.hazards.iter().all(|h| match h {
            Hazard::Zone(fp) => fp.distance(p) >= AGENT_RADIUS + margin,
            Hazard::Ball(c, r) => (p - *c).length() >= AGENT_RADIUS + r + margin,
        })
    }

    fn free(&self, p: Vec2) -> bool {
        let s = self.spec.size;
        let r = AGENT_RADIUS;
        p.x >= r
            && p.z >= r
            && p.x <= s - r
            && p.z <= s - r
            && self
                .solids
                .iter()
                .all(|(fp, _, _)| fp.distance(p) >= r + SOLID_MARGIN)
            && self.hazard_clear(p, HAZARD_MARGIN)
    }

    fn segment_clear(&self, a: Vec2, b: Vec2, check: impl Fn(Vec2) -> bool) -> bool {
        let len = (b - a).length();
        let n = (len / 0.1).ceil().max(1.0) as usize;
        (0..=n).all(|i| check(a + (b - a) * (i as f64 / n as f64)))
    }
}

#[derive(PartialEq)]
struct Node {
    f: f64,
    cell: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.partial_cmp(&self.f)
            .unwrap_or(Ordering::Equal)
            .then_with(|| o.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// A* over a uniform grid; start and goal cells are always enterable.
fn grid_path(world: &World<'_>, start: Vec2, goal: Vec2) -> Option<Vec<Vec2>> {
    let n = (world.spec.size / CELL).round() as i64;
    let idx = |p: Vec2| -> usize {
        let cx = ((p.x / CELL).floor() as i64).clamp(0, n - 1);
        let cz = ((p.z / CELL).floor() as i64).clamp(0, n - 1);
        (cz * n + cx) as usize
    };
    let center = |c: usize| -> Vec2 {
        let (cx, cz) = (c as i64 % n, c as i64 / n);
        Vec2::new((cx as f64 + 0.5) * CELL, (cz as f64 + 0.5) * CELL)
    };
    let total = (n * n) as usize;
    let mut free = vec![None; total];
    let (s, g) = (idx(start), idx(goal));
    let mut is_free = |c: usize| -> bool {
        if c == s || c == g {
            return true;
        }
        *free[c].get_or_insert_with(|| world.free(center(c)))
    };
    let mut cost = vec![f64::INFINITY; total];
    let mut parent = vec![usize::MAX; total];
    let mut open = BinaryHeap::new();
    cost[s] = 0.0;
    open.push(Node {
        f: (goal - start).length(),
        cell: s,
    });
    while let Some(Node { cell, .. }) = open.pop() {
        if cell == g {
            let mut path = vec![goal];
            let mut c = parent[g];
            while c != usize::MAX && c != s {
                path.push(center(c));
                c = parent[c];
            }
            path.reverse();
            return Some(path);
        }
        let (cx, cz) = (cell as i64 % n, cell as i64 / n);
        for (dx, dz) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let (nx, nz) = (cx + dx, cz + dz);
            if nx < 0 || nz < 0 || nx >= n || nz >= n {
                continue;
            }
            let next = (nz * n + nx) as usize;
            if !is_free(next) {
                continue;
            }
            if dx != 0 && dz != 0 {
                let a = (cz * n + nx) as usize;
                let b = (nz * n + cx) as usize;
                if !is_free(a) || !is_free(b) {
                    continue;
                }
            }
            let step = if dx != 0 && dz != 0 { CELL * std::f64::consts::SQRT_2 } else { CELL };
            let c = cost[cell] + step;
            if c < cost[next] {
                cost[next] = c;
                parent[next] = cell;
                open.push(Node {
                    f: c + (goal - center(next)).length(),
                    cell: next,
                });
            }
        }
    }
    None
}

/// Drops intermediate waypoints that are in direct line of sight.
fn string_pull(world: &World<'_>, start: Vec2, path: &[Vec2]) -> Vec<Vec2> {
    let mut out = Vec::new();
    let mut from = start;
    let mut i = 0;
    while i < path.len() {
        let mut j = path.len() - 1;
        while j > i && !world.segment_clear(from, path[j], |p| world.free(p)) {
            j -= 1;
        }
        out.push(path[j]);
        from = path[j];
        i = j + 1;
    }
    out
}

fn path_length(start: Vec2, pts: &[Vec2]) -> f64 {
    let mut len = 0.0;
    let mut prev = start;
    for p in pts {
        len += (*p - prev).length();
        prev = *p;
    }
    len
}

/// Picks the goal to go for and the route to it. Yellow goals come before
/// green ones; among those, bigger goals first, then shorter routes.
pub fn plan(state: &EpisodeState, spec: &ArenaSpec) -> Option<OraclePlan> {
    let world = World::new(spec, state);
    let start = state.agent_pos.flat();
    let mut best: Option<(bool, f64, f64, OraclePlan)> = None;
    for (i, (obj, st)) in spec.objects.iter().zip(&state.objects).enumerate() {
        let yellow = match obj.kind {
            ObjectKind::YellowGoal => true,
            ObjectKind::GreenGoal => false,
            _ => continue,
        };
        if st.collected || st.position.y > GROUND_REACH {
            continue;
        }
        let target = st.position.flat();
        let Some(raw) = grid_path(&world, start, target) else {
            continue;
        };
        let waypoints = string_pull(&world, start, &raw);
        let len = path_length(start, &waypoints);
        let value = obj.diameter();
        let better = match &best {
            None => true,
            Some((by, bv, bl, _)) => (yellow, value, -len) > (*by, *bv, -*bl),
        };
        if better {
            best = Some((yellow, value, len, OraclePlan { goal: i, waypoints }));
        }
    }
    best.map(|b| b.3)
}

fn quantized_turn(bearing: f64) -> i32 {
    let q = TURN_QUANTUM as f64;
    ((bearing / q).round() * q) as i32
}

/// One script for the current state: turn toward the next waypoint, or walk
/// to it. Falls back to an exploration turn when no goal is reachable.
pub fn greedy_policy(state: &EpisodeState, spec: &ArenaSpec, step_length: f64) -> Script {
    let Some(plan) = plan(state, spec) else {
        return Script::from_commands(vec![Command::Turn(90)]);
    };
    command_for(state, spec, &plan, step_length)
}

fn command_for(state: &EpisodeState, spec: &ArenaSpec, plan: &OraclePlan, step: f64) -> Script {
    let world = World::new(spec, state);
    let pos = state.agent_pos.flat();
    let target = plan.waypoints[0];
    let is_goal = plan.waypoints.len() == 1;
    let delta = target - pos;
    let dist = delta.length();
    let bearing = angle_diff(state.agent_heading as f64, delta.heading());
    let turn = quantized_turn(bearing);
    if turn != 0 {
        return Script::from_commands(vec![Command::Turn(turn)]);
    }
    let heading = crate::arena::Vec2::from_heading(state.agent_heading as f64);
    let lateral = (delta.x * heading.z - delta.z * heading.x).abs();
    let n = if is_goal {
        let goal_r = spec.objects[plan.goal].diameter() / 2.0;
        let reach = 0.8 * (goal_r + AGENT_RADIUS);
        let base = (dist / step).ceil() as i32;
        if lateral > reach && dist > 2.0 * step {
            // Too far to hit on this heading; close half the gap and re-aim.
            ((dist / 2.0) / step).ceil() as i32
        } else {
            let mut n = base + GOAL_MARGIN;
            while n > base {
                let end = pos + heading * (n as f64 * step);
                if world.segment_clear(pos, end, |p| world.hazard_clear(p, 0.05)) {
                    break;
                }
                n -= 1;
            }
            n
        }
    } else {
        let n = (dist / step).round() as i32;
        if lateral > 0.6 && dist > 4.0 * step {
            ((dist / 2.0) / step).ceil() as i32
        } else {
            n
        }
    };
    Script::from_commands(vec![Command::Go(n.clamp(1, MAX_GO_STEPS))])
}

pub struct GreedyOracle {
    replan_every: u32,
    since_plan: u32,
    plan: Option<OraclePlan>,
}

impl GreedyOracle {
    pub fn new(replan_every: u32) -> Self {
        Self {
            replan_every: replan_every.max(1),
            since_plan: 0,
            plan: None,
        }
    }

    fn next_script(&mut self, state: &EpisodeState, spec: &ArenaSpec, step: f64) -> Script {
        let pos = state.agent_pos.flat();
        if let Some(p) = &mut self.plan {
            if state.objects[p.goal].collected {
                self.plan = None;
            } else {
                while p.waypoints.len() > 1 && (p.waypoints[0] - pos).length() < 0.6 {
                    p.waypoints.remove(0);
                }
            }
        }
        if self.plan.is_none() || self.since_plan >= self.replan_every {
            self.plan = plan(state, spec);
            self.since_plan = 0;
        }
        self.since_plan += 1;
        match &self.plan {
            Some(p) => command_for(state, spec, p, step),
            None => Script::from_commands(vec![Command::Turn(90)]),
        }
    }
}

impl Agent for GreedyOracle {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn begin_episode(&mut self, _task_id: &str) {
        self.plan = None;
        self.since_plan = 0;
    }

    fn respond(&mut self, _obs: &ObservationMsg, ctx: Option<&TurnContext>) -> Option<String> {
        let ctx = ctx?;
        Some(self.next_script(&ctx.state, &ctx.spec, ctx.step_length).to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{load_arena, Arena, PhysicsConfig};

    fn setup(objects: &str, agent: &str, heading: i32) -> (ArenaSpec, EpisodeState) {
        let spec = load_arena(&format!(
            "arenaspec v1\nid: t\ntime_limit: 500\nagent_position: {agent}\nagent_heading: {heading}\n{objects}"
        ))
        .unwrap();
        let st = Arena::new(spec.clone(), PhysicsConfig::default()).initial_state(0);
        (spec, st)
    }

    const STEP: f64 = 40.0 / 35.0;

    #[test]
    fn goal_dead_ahead() {
        let (spec, st) = setup("object: green_goal\n  position: 20 0 14\n  size: 1\n", "20 0 4", 0);
        assert_eq!(greedy_policy(&st, &spec, STEP).to_string(), "Go(12);");
    }

    #[test]
    fn goal_to_the_right_and_behind() {
        let (spec, st) = setup("object: green_goal\n  position: 30 0 10\n  size: 1\n", "20 0 10", 0);
        assert_eq!(greedy_policy(&st, &spec, STEP).to_string(), "Turn(90);");
        let (spec, st) = setup("object: green_goal\n  position: 20 0 5\n  size: 1\n", "20 0 15", 0);
        assert_eq!(greedy_policy(&st, &spec, STEP).to_string(), "Turn(180);");
    }

    #[test]
    fn detours_around_death_zone() {
        let (spec, st) = setup(
            "object: death_zone\n  position: 20 0 12\n  size: 8 4\n\nobject: green_goal\n  position: 20 0 20\n  size: 1\n",
            "20 0 4",
            0,
        );
        let p = plan(&st, &spec).unwrap();
        assert!(p.waypoints.len() >= 2);
        let world = World::new(&spec, &st);
        let mut prev = st.agent_pos.flat();
        for w in &p.waypoints[..p.waypoints.len() - 1] {
            assert!(world.segment_clear(prev, *w, |q| world.hazard_clear(q, 0.0)));
            prev = *w;
        }
        let script = greedy_policy(&st, &spec, STEP);
        assert!(matches!(script.commands[0], Command::Turn(_)));
    }

    #[test]
    fn nothing_reachable_explores() {
        let (spec, st) = setup("object: green_goal\n  position: 20 3 20\n  size: 1\n", "20 0 4", 0);
        assert_eq!(greedy_policy(&st, &spec, STEP).to_string(), "Turn(90);");
    }
}
