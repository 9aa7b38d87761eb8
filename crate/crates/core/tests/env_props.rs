use curriculum_core::env::{builtin, builtin_ids, step_env, MAX_SPEED};
use proptest::prelude::*;

fn action_component() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => -3.0f64..3.0,
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rollouts_stay_bounded_and_replay_exactly(
        env_idx in 0usize..3,
        seed in any::<u64>(),
        actions in prop::collection::vec((action_component(), action_component()), 1..250),
    ) {
        let env = builtin(builtin_ids()[env_idx]).unwrap();
        let run = || {
            let mut state = env.reset(&env.target_goal_spec, seed).unwrap();
            let mut out = Vec::new();
            for (x, y) in &actions {
                let t = step_env(&env, &mut state, &[*x, *y]).unwrap();
                let speed = state.agent_vel[0].hypot(state.agent_vel[1]);
                out.push((t, speed, state.steps));
                if state.terminated {
                    break;
                }
            }
            out
        };
        let a = run();
        for (t, speed, steps) in &a {
            prop_assert!(t.next_observation.values.iter().all(|v| v.is_finite() && v.abs() <= 1.0 + 1e-12));
            prop_assert!(*speed <= MAX_SPEED + 1e-9);
            prop_assert!(*steps <= env.horizon);
            prop_assert!(t.action.iter().all(|v| v.is_finite()));
        }
        let (last, _, steps) = a.last().unwrap();
        if *steps == env.horizon {
            prop_assert!(last.terminated);
        }
        prop_assert_eq!(a, run());
    }

    #[test]
    fn observation_width_matches_registry(env_idx in 0usize..3, seed in any::<u64>()) {
        let env = builtin(builtin_ids()[env_idx]).unwrap();
        let (_, obs) = env.reset_env(&env.target_goal_spec, seed).unwrap();
        let dims: usize = env.variables.iter().map(|v| v.dims).sum();
        prop_assert_eq!(obs.values.len(), dims);
        prop_assert_eq!(obs.to_map(&env).len(), env.variables.len());
    }
}
