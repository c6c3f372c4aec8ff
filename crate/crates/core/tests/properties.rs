use proptest::prelude::*;
use serde_json::json;

use tampforge::complexity::{score_and_classify, CategoryCounts, Classification};
use tampforge::continuous::interpolate;
use tampforge::envs::generate_instance;
use tampforge::model::{Action, DifficultyParams, EnvKind, FailureReason, Plan, Waypoint, DIFFICULTY_BUCKETS};
use tampforge::oracles::{reference_plan, DEFAULT_BUDGET};
use tampforge::sandbox::SandboxResult;
use tampforge::verifier::{verify, VerificationConfig};
use tampforge::wire::{parse_plan, serialize_plan};

fn env_kind() -> impl Strategy<Value = EnvKind> {
    prop::sample::select(EnvKind::ALL.to_vec())
}

/// Waypoints with strictly increasing times.
fn trajectory() -> impl Strategy<Value = Vec<Waypoint>> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, 0.001..5.0f64), 1..12).prop_map(|v| {
        let mut t = 0.0;
        v.into_iter()
            .map(|(x, y, dt)| {
                let w = Waypoint::new(x, y, t);
                t += dt;
                w
            })
            .collect()
    })
}

fn counts() -> impl Strategy<Value = CategoryCounts> {
    prop::array::uniform7(0u32..40).prop_map(|v| CategoryCounts {
        loops: v[0],
        nested_loops: v[1],
        recursion: v[2],
        search_frontier: v[3],
        numeric_ops: v[4],
        combinatorial_enumeration: v[5],
        constraint_checks: v[6],
    })
}

fn rank(c: Classification) -> u8 {
    match c {
        Classification::Trivial => 0,
        Classification::Moderate => 1,
        Classification::Symbolic => 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn interpolation_hits_waypoints_exactly(traj in trajectory()) {
        for w in &traj {
            let p = interpolate(&traj, w.t).unwrap();
            prop_assert_eq!((p.x, p.y), (w.x, w.y));
        }
    }

    #[test]
    fn interpolation_stays_on_segment(traj in trajectory(), s in 0.0..1.0f64) {
        let t = traj.last().unwrap().t * s;
        let p = interpolate(&traj, t).unwrap();
        let i = traj.partition_point(|w| w.t <= t).max(1) - 1;
        let a = traj[i];
        let b = traj.get(i + 1).copied().unwrap_or(a);
        let slack = 1e-9;
        prop_assert!(p.x >= a.x.min(b.x) - slack && p.x <= a.x.max(b.x) + slack);
        prop_assert!(p.y >= a.y.min(b.y) - slack && p.y <= a.y.max(b.y) + slack);
    }

    #[test]
    fn interpolation_rejects_times_outside(traj in trajectory(), dt in 1e-6..10.0f64) {
        let last = traj.last().unwrap().t;
        prop_assert!(interpolate(&traj, -dt).is_err());
        prop_assert!(interpolate(&traj, last + dt).is_err());
    }

    #[test]
    fn score_is_monotone_in_every_category(c in counts(), which in 0usize..7, bump in 1u32..20) {
        let mut more = c;
        let slot = match which {
            0 => &mut more.loops,
            1 => &mut more.nested_loops,
            2 => &mut more.recursion,
            3 => &mut more.search_frontier,
            4 => &mut more.numeric_ops,
            5 => &mut more.combinatorial_enumeration,
            _ => &mut more.constraint_checks,
        };
        *slot += bump;
        let (s0, c0) = score_and_classify(&c);
        let (s1, c1) = score_and_classify(&more);
        prop_assert!(s1 >= s0);
        prop_assert!(rank(c1) >= rank(c0));
    }

    #[test]
    fn action_plans_survive_the_wire(
        steps in prop::collection::vec(
            prop::option::of((
                prop::sample::select(vec!["pick_up", "put_down", "unstack", "stack"]),
                "[A-H]",
                "[A-H]",
            )),
            0..12,
        ),
        noise in "[ -~]{0,40}",
    ) {
        // Legality is the verifier's job; any well-formed blocksworld
        // document must come back unchanged.
        let plan = Plan::Actions {
            steps: steps
                .into_iter()
                .map(|s| match s {
                    None => Vec::new(),
                    Some((a, x, y)) => {
                        let args = if a.ends_with("stack") { vec![json!(x), json!(y)] } else { vec![json!(x)] };
                        vec![Action::new("arm", a, args)]
                    }
                })
                .collect(),
        };
        let inst = generate_instance(EnvKind::Blocksworld, &DifficultyParams::bucket(EnvKind::Blocksworld, 0), 0).unwrap();
        let text = format!("{noise}\n{}", serialize_plan(&plan));
        match parse_plan(text.as_bytes(), &inst) {
            Ok(back) => prop_assert_eq!(back, plan),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn unknown_actions_do_not_parse(name in "[a-z]{1,8}") {
        prop_assume!(!["pick_up", "put_down", "unstack", "stack"].contains(&name.as_str()));
        let plan = Plan::Actions { steps: vec![vec![Action::new("arm", name, vec![json!("A")])]] };
        let inst = generate_instance(EnvKind::Blocksworld, &DifficultyParams::bucket(EnvKind::Blocksworld, 0), 0).unwrap();
        prop_assert!(parse_plan(serialize_plan(&plan).as_bytes(), &inst).is_err());
    }

    #[test]
    fn waypoint_plans_survive_the_wire(trajs in prop::collection::vec(trajectory(), 1..6), seed in 0u64..50) {
        let inst = generate_instance(EnvKind::PathDrones, &DifficultyParams::bucket(EnvKind::PathDrones, 0), seed).unwrap();
        let reference = reference_plan(&inst, DEFAULT_BUDGET).unwrap();
        let robots: Vec<String> = reference.trajectories().unwrap().keys().cloned().collect();
        let plan = Plan::Waypoints {
            trajectories: robots.into_iter().zip(trajs.into_iter().cycle()).collect(),
        };
        let back = parse_plan(serialize_plan(&plan).as_bytes(), &inst).unwrap();
        prop_assert_eq!(back, plan);
    }

    #[test]
    fn failure_reasons_round_trip_through_json(i in 0usize..FailureReason::ALL.len()) {
        let r = FailureReason::ALL[i];
        let text = serde_json::to_string(&r).unwrap();
        prop_assert_eq!(serde_json::from_str::<FailureReason>(&text).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generation_is_deterministic(env in env_kind(), bucket in 0..DIFFICULTY_BUCKETS, seed in any::<u64>()) {
        let d = DifficultyParams::bucket(env, bucket);
        let a = generate_instance(env, &d, seed).unwrap();
        let b = generate_instance(env, &d, seed).unwrap();
        prop_assert_eq!(a.to_json_pretty(), b.to_json_pretty());
    }

    #[test]
    fn reference_plans_verify(env in env_kind(), seed in 0u64..10_000) {
        let d = DifficultyParams::bucket(env, 0);
        let inst = generate_instance(env, &d, seed).unwrap();
        let plan = reference_plan(&inst, DEFAULT_BUDGET).expect("every generated instance has a reference plan");
        let out = serialize_plan(&plan);
        let v = verify(&inst, out.as_bytes(), &SandboxResult::not_executed(out.clone()), &VerificationConfig::default());
        prop_assert!(v.is_success(), "{env} seed {seed}: {:?}", v);
    }

    #[test]
    fn instances_round_trip_through_json(env in env_kind(), seed in any::<u64>()) {
        let inst = generate_instance(env, &DifficultyParams::bucket(env, 1), seed).unwrap();
        let back = tampforge::model::TaskInstance::from_json(&inst.to_json_pretty()).unwrap();
        prop_assert_eq!(back, inst);
    }
}
