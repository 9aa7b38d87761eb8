mod common;

use curriculum_core::env::point_maze;
use curriculum_core::stats::{format_value, parse_rendered, render_summaries, summarize};
use curriculum_core::trainer::{rollout, PolicyCheckpoint, TrajectoryBatch};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_policy_batch(seed: u64, episodes: usize) -> TrajectoryBatch {
    let env = point_maze();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = (0..PolicyCheckpoint::param_count(&env)).map(|_| rng.random_range(-2.0..2.0)).collect();
    let ckpt = PolicyCheckpoint::with_params(&env, params);
    rollout(&ckpt.policy(), &env, &env.target_goal_spec, None, episodes, seed, 0.99).unwrap()
}

#[test]
fn means_match_a_naive_accumulator() {
    let env = point_maze();
    let batch = random_policy_batch(3, 20);
    let summary = summarize(&batch, &env, 0).unwrap();
    let mut offset = 0;
    for var in &env.variables {
        for c in 0..var.dims {
            let xs: Vec<f64> = batch
                .episodes
                .iter()
                .flat_map(|e| e.transitions.iter())
                .map(|t| t.next_observation.values[offset + c])
                .collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var_ = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s = summary.variables.iter().find(|v| v.name == var.name).unwrap();
            assert!((s.mean[c] - mean).abs() < 1e-12, "{} mean", var.name);
            assert!((s.std[c] - var_.sqrt()).abs() < 1e-6, "{} std", var.name);
            assert_eq!((s.min[c], s.max[c]), (lo, hi), "{} range", var.name);
        }
        offset += var.dims;
    }
    let steps: usize = batch.episodes.iter().map(|e| e.transitions.len()).sum();
    assert_eq!(summary.episode_length_mean, steps as f64 / 20.0);
    let wins = batch.episodes.iter().filter(|e| e.success).count();
    assert_eq!(summary.success_rate, wins as f64 / 20.0);
    assert_eq!(summary.episode_count, 20);
}

#[test]
fn golden_rendering() {
    let env = point_maze();
    let summaries: Vec<_> = common::golden::batches()
        .iter()
        .enumerate()
        .map(|(k, b)| summarize(b, &env, k).unwrap())
        .collect();
    assert_eq!(summaries[1].fault_count, 1);
    let golden = std::fs::read_to_string(common::test_data("render_golden.txt")).unwrap();
    assert_eq!(render_summaries(&summaries), golden.trim_end());
}

#[test]
fn format_value_rounds_half_away_from_zero() {
    assert_eq!(format_value(0.12345), "0.123");
    assert_eq!(format_value(-0.0005), "-0.001");
    assert_eq!(format_value(0.0005), "0.001");
    assert_eq!(format_value(-0.0625), "-0.063");
    assert_eq!(format_value(-0.0004), "0.000");
    assert_eq!(format_value(-0.0), "0.000");
    assert_eq!(format_value(f64::NAN), "nan");
}

#[test]
fn rendered_text_parses_back() {
    let env = point_maze();
    let summaries: Vec<_> = (0..3)
        .map(|k| summarize(&random_policy_batch(k, 5), &env, k as usize).unwrap())
        .collect();
    let blocks = parse_rendered(&render_summaries(&summaries)).unwrap();
    assert_eq!(blocks.len(), 3);
    for (b, s) in blocks.iter().zip(&summaries) {
        assert_eq!(b.agent, s.candidate_index);
        assert!((b.success_rate - s.success_rate).abs() <= 0.0005 + 1e-12);
        assert!((b.episode_length - s.episode_length_mean).abs() <= 0.0005 + 1e-9);
        for ((name, vals), v) in b.variables.iter().zip(&s.variables) {
            assert_eq!(name, &v.name);
            for (x, m) in vals.iter().zip(&v.mean) {
                assert!((x - m).abs() <= 0.0005 + 1e-12, "{name}: {x} vs {m}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn summary_ignores_episode_order(seed in 0u64..1000, rot in 0usize..6) {
        let env = point_maze();
        let batch = random_policy_batch(seed, 6);
        let mut shuffled = batch.clone();
        shuffled.episodes.rotate_left(rot);
        shuffled.episodes.swap(0, 5);
        let a = summarize(&batch, &env, 0).unwrap();
        let b = summarize(&shuffled, &env, 0).unwrap();
        prop_assert_eq!(a.episode_length_mean, b.episode_length_mean);
        prop_assert_eq!(a.success_rate, b.success_rate);
        for (x, y) in a.variables.iter().zip(&b.variables) {
            for (m, n) in x.mean.iter().zip(&y.mean) {
                prop_assert!((m - n).abs() < 1e-12);
            }
            prop_assert_eq!(&x.min, &y.min);
            prop_assert_eq!(&x.max, &y.max);
        }
    }

    #[test]
    fn format_value_is_within_half_a_unit(v in -1.0e3f64..1.0e3) {
        let s = format_value(v);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= 0.0005 + 1e-9);
        prop_assert_eq!(s.split('.').nth(1).map(str::len), Some(3));
    }
}
