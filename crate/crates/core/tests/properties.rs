use arenabench::arena::{
    health_for, load_arena, Arena, ArenaSpec, EpisodeState, MotorFrame, ObjectKind, PhysicsConfig,
    Termination, TraceHasher, AGENT_DIAMETER,
};
use arenabench::dsl::{compile, parse, quantize_turn, Command, MotionConfig, Script};
use arenabench::harness::TaskPack;
use arenabench::render::{render, CameraModel};
use arenabench::stats::{aggregate, export_csv, ingest_external_csv, Population, TrialRecord};
use proptest::prelude::*;

fn micro(time_limit: u32, objects: &str) -> ArenaSpec {
    load_arena(&format!(
        "arenaspec v1\nid: micro\ntime_limit: {time_limit}\npass_mark: 0\nagent_position: 20 0 4\nagent_heading: 0\n\n{objects}"
    ))
    .unwrap()
}

fn idle_reward(spec: &ArenaSpec, n: u32) -> f64 {
    let arena = Arena::new(spec.clone(), PhysicsConfig::default());
    let mut s = arena.initial_state(0);
    for _ in 0..n {
        s = arena.step(&s, MotorFrame::IDLE).unwrap().0;
    }
    s.cumulative_reward
}

fn frame() -> impl Strategy<Value = MotorFrame> {
    (-1i8..=1, prop::sample::select(vec![-6i8, 0, 6])).prop_map(|(forward, rotate)| MotorFrame { forward, rotate })
}

fn bundled() -> Vec<ArenaSpec> {
    let pack = TaskPack::bundled().unwrap();
    pack.ids().map(|id| pack.get(id).unwrap().clone()).collect()
}

/// Boxes the agent cannot stand on or walk under from elevation `feet`.
fn blocking(spec: &ArenaSpec, state: &EpisodeState, feet: f64) -> Vec<arenabench::arena::Obb> {
    let tol = PhysicsConfig::default().climb_tolerance;
    spec.objects
        .iter()
        .zip(&state.objects)
        .filter(|(o, _)| {
            matches!(
                o.kind,
                ObjectKind::Wall(_) | ObjectKind::Platform | ObjectKind::PushableBlock
            )
        })
        .filter(|(o, s)| {
            let bottom = s.position.y;
            let top = bottom + o.extents().y;
            top > feet + tol && bottom < feet + AGENT_DIAMETER
        })
        .map(|(o, s)| o.footprint_at(s.position))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idle_decay_is_exact(t in 10u32..1000, frac in 0.0f64..1.0) {
        let n = ((t - 1) as f64 * frac) as u32;
        let r = idle_reward(&micro(t, ""), n);
        prop_assert!((r + n as f64 / t as f64).abs() <= 1e-12, "{} vs {}", r, -(n as f64) / t as f64);
    }

    #[test]
    fn hot_zone_doubles_decay(t in 10u32..1000, frac in 0.0f64..1.0) {
        let n = ((t - 1) as f64 / 2.0 * frac) as u32;
        let plain = idle_reward(&micro(t, ""), n);
        let hot = idle_reward(&micro(t, "object: hot_zone\n  position: 20 0 4\n  size: 8 0 8\n"), n);
        prop_assert_eq!(hot, 2.0 * plain);
    }

    #[test]
    fn world_invariants_hold_along_random_walks(
        task in 0usize..40,
        frames in prop::collection::vec(frame(), 1..400),
        seed in any::<u64>(),
    ) {
        let spec = &bundled()[task];
        let arena = Arena::new(spec.clone(), PhysicsConfig::default());
        let mut s = arena.initial_state(seed);
        for f in &frames {
            if s.terminated != Termination::Running {
                prop_assert!(arena.step(&s, *f).is_err());
                prop_assert_eq!(&arena.exhaust_budget(&s), &s);
                continue;
            }
            let (next, _) = arena.step(&s, *f).unwrap();
            prop_assert_eq!(next.health, health_for(next.cumulative_reward, 1.0));
            let p = next.agent_pos.flat();
            for b in blocking(spec, &next, next.agent_pos.y) {
                prop_assert!(!b.contains(p), "agent at {:?} inside a solid in {}", next.agent_pos, spec.id);
            }
            s = next;
        }
    }

    #[test]
    fn same_inputs_same_trace(
        task in 0usize..40,
        frames in prop::collection::vec(frame(), 1..200),
        seed in any::<u64>(),
    ) {
        let spec = &bundled()[task];
        let run = || {
            let arena = Arena::new(spec.clone(), PhysicsConfig::default());
            let mut s = arena.initial_state(seed);
            let mut h = TraceHasher::new();
            h.absorb_initial(&s);
            for f in &frames {
                if !s.is_running() {
                    break;
                }
                let (next, out) = arena.step(&s, *f).unwrap();
                h.absorb(&next, &out);
                s = next;
            }
            h.absorb_final(&s);
            h.finish()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn frames_render_identically(task in 0usize..40, heading in 0i32..360) {
        let mut spec = bundled()[task].clone();
        spec.agent_start.heading = heading;
        let s = Arena::new(spec.clone(), PhysicsConfig::default()).initial_state(0);
        let cam = CameraModel::with_resolution(48, 32);
        prop_assert_eq!(render(&s, &spec, &cam).pixels, render(&s, &spec, &cam).pixels);
    }
}

fn command() -> impl Strategy<Value = Command> {
    prop_oneof![
        "[a-zA-Z0-9 ,.!?]{1,30}"
            .prop_map(|t| t.trim().to_string())
            .prop_filter("empty thought", |t| !t.is_empty())
            .prop_map(Command::Think),
        (1i32..=35, any::<bool>()).prop_map(|(n, back)| Command::Go(if back { -n } else { n })),
        (-360i32..=360).prop_map(Command::Turn),
    ]
}

fn script() -> impl Strategy<Value = Script> {
    prop::collection::vec(command(), 1..10).prop_map(Script::from_commands)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn pretty_print_reparses(s in script()) {
        let back = parse(&s.to_string()).unwrap();
        prop_assert_eq!(back.commands, s.commands);
    }

    #[test]
    fn quantized_turns(d in -360i32..=360) {
        let q = quantize_turn(d).unwrap();
        prop_assert_eq!(q % 6, 0);
        prop_assert!(q.abs() <= d.abs());
        prop_assert!(q == 0 || q.signum() == d.signum());
        prop_assert!(d.abs() - q.abs() < 6);
    }

    #[test]
    fn compiled_motion_sums(s in script()) {
        let cfg = MotionConfig::default();
        let plan = compile(&s, &cfg);
        let steps: i32 = s.commands.iter().map(|c| match c { Command::Go(n) => *n, _ => 0 }).sum();
        let turns: i32 = s.commands.iter().map(|c| match c { Command::Turn(d) => quantize_turn(*d).unwrap(), _ => 0 }).sum();
        prop_assert_eq!(plan.total_rotation(), turns);
        prop_assert!((plan.displacement(&cfg) - steps as f64 * 40.0 / 35.0).abs() < 1e-9);
    }

    #[test]
    fn prose_around_a_script_is_ignored(
        s in script(),
        before in "[a-z .,]{0,40}",
        after in "[a-z .,]{0,40}",
    ) {
        let text = format!("{before}\n{s}\n{after}");
        prop_assert_eq!(parse(&text).unwrap().commands, s.commands);
    }
}

fn record(agent: &str, pop: Population, level: u8, task: u8, passed: bool) -> TrialRecord {
    TrialRecord::new(agent, pop, &format!("l{level:02}_task{task}"), passed)
}

fn population_records() -> impl Strategy<Value = Vec<TrialRecord>> {
    prop::collection::vec((0u8..6, 1u8..=3, 1u8..=4, any::<bool>()), 1..60).prop_map(|rows| {
        rows.into_iter()
            .map(|(who, level, task, passed)| record(&format!("c{who}"), Population::Child, level, task, passed))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pooling_ignores_order(
        rows in prop::collection::vec((1u8..=10, 1u8..=4, any::<bool>()), 1..60),
        shuffle_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let recs: Vec<TrialRecord> = rows.iter().map(|(l, t, p)| record("m", Population::Llm, *l, *t, *p)).collect();
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
        prop_assert_eq!(aggregate(&recs).unwrap(), aggregate(&shuffled).unwrap());
    }

    #[test]
    fn quartiles_are_ordered(recs in population_records()) {
        for s in aggregate(&recs).unwrap() {
            let (q1, m, q3) = (s.q1.unwrap(), s.median.unwrap(), s.q3.unwrap());
            prop_assert!(q1 <= m && m <= q3);
            if s.per_individual.windows(2).all(|w| w[0] == w[1]) {
                prop_assert_eq!(q1, q3);
            }
        }
    }

    #[test]
    fn export_then_ingest_is_identity(recs in population_records(), reward in -2.0f64..3.0) {
        let mut recs = recs;
        for (i, r) in recs.iter_mut().enumerate() {
            r.trial_index = Some(i as u32);
            r.final_reward = Some(reward);
            r.level = r.level();
        }
        let mut buf = Vec::new();
        export_csv(&recs, &mut buf).unwrap();
        prop_assert_eq!(ingest_external_csv(buf.as_slice()).unwrap(), recs);
    }
}
