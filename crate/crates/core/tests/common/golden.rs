//! Hand-built trajectory batches for the point_maze registry whose rendered means
//! were worked out by hand (see tests/data/render_golden.txt).

use curriculum_core::env::{Observation, Transition};
use curriculum_core::trainer::{Episode, TrajectoryBatch};

fn transition(next: [f64; 10]) -> Transition {
    Transition {
        observation: Observation { values: vec![0.0; 10] },
        action: vec![0.0, 0.0],
        next_observation: Observation { values: next.to_vec() },
        terminated: false,
        success: false,
    }
}

fn episode(steps: Vec<[f64; 10]>, success: bool) -> Episode {
    Episode {
        transitions: steps.into_iter().map(transition).collect(),
        success,
        discounted_return: 0.0,
        fault: None,
    }
}

/// Agent 0: four steps over two episodes (lengths 3 and 1), one success.
/// Agent 1: one step, no success. A faulted episode is mixed into agent 1 and
/// must be ignored by the variable means.
pub fn batches() -> Vec<TrajectoryBatch> {
    let a = TrajectoryBatch {
        episodes: vec![
            episode(
                vec![
                    [0.5, -0.25, 0.125, 0.0, -0.5, 0.75, 0.5, 1.0, 0.0, 1.0],
                    [0.25, -0.25, 0.0625, 0.0, -0.5, 0.75, 0.25, 0.5, -0.5, 1.0],
                    [-1.0, 1.0, -0.5, 0.5, 0.25, -0.75, -0.25, 0.0, 1.0, 1.0],
                ],
                false,
            ),
            episode(vec![[0.0, 0.0, -0.001, 0.004, 0.25, -0.75, -0.5, -0.5, 0.0, 1.0]], true),
        ],
    };
    let mut faulted = episode(vec![[9.0; 10]], false);
    faulted.fault = Some("reward evaluated to a non-finite value".into());
    let b = TrajectoryBatch {
        episodes: vec![
            episode(vec![[0.0005, -0.0005, 0.12345, -0.00025, 0.1, 0.2, 0.3, 0.4, 0.5, 0.0]], false),
            faulted,
        ],
    };
    vec![a, b]
}
