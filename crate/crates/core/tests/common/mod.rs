#![allow(dead_code)]

pub mod checks;
pub mod dsl_gen;
pub mod golden;
pub mod server;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use curriculum_core::orchestrator::RunConfig;
use curriculum_core::trainer::TrainConfig;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn test_data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Cheap settings for pipeline tests: a handful of CEM iterations on a small population.
pub fn small_config(seed: u64, fixtures: &Path) -> RunConfig {
    RunConfig {
        seed,
        k: 4,
        retries: 2,
        eval_episodes: 4,
        target_episodes: 8,
        backend: format!("scripted:{}", fixtures.display()),
        train: TrainConfig {
            population: 12,
            elite_count: 3,
            iterations: 3,
            episodes_per_fitness: 2,
            ..TrainConfig::default()
        },
        ..RunConfig::default()
    }
}

/// The acceptance-suite maze settings (mirrors fixtures/maze.toml).
pub fn maze_config(seed: u64, fixtures: &Path) -> RunConfig {
    RunConfig {
        env_id: "point_maze".into(),
        seed,
        k: 4,
        retries: 2,
        eval_episodes: 20,
        target_episodes: 100,
        budget_subtasks: 3,
        backend: format!("scripted:{}", fixtures.display()),
        train: TrainConfig {
            population: 128,
            elite_count: 16,
            iterations: 30,
            episodes_per_fitness: 8,
            sigma_init_fresh: 0.5,
            sigma_init_warm: 0.5,
            ..TrainConfig::default()
        },
        ..RunConfig::default()
    }
}

/// Every file under `dir` except the timestamped log, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
            if rel == "run.log" {
                continue;
            }
            out.insert(rel, std::fs::read(&path).unwrap());
        }
    }
    out
}

/// Names of files that differ between two snapshots (empty when identical).
pub fn snapshot_diff(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}
