use serde::{Deserialize, Serialize};

use super::{Policy, RewardSource};
use crate::dsl::{RewardFault, Scratch, TypedProgram};
use crate::env::{EnvError, EnvState, EnvironmentDefinition, GoalSpec, Transition};

/// Reusable per-worker buffers for the allocation-free episode loop.
pub(crate) struct Buffers {
    obs: Vec<f64>,
    action: Vec<f64>,
    scratch: Scratch,
}

impl Buffers {
    pub(crate) fn new(env: &EnvironmentDefinition, reward: &RewardSource) -> Self {
        Self {
            obs: vec![0.0; env.observation_dims()],
            action: vec![0.0; env.action_dims],
            scratch: match reward {
                RewardSource::Program(p) => p.scratch(),
                RewardSource::SuccessIndicator => Scratch::default(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EpisodeResult {
    pub discounted_return: f64,
    pub steps: usize,
    pub success: bool,
    pub fault: Option<RewardFault>,
}

/// Runs one episode and returns its discounted return. Stops at the first reward fault.
/// `spec` must already be validated for `env`.
pub(crate) fn run_episode<P: Policy + ?Sized>(
    env: &EnvironmentDefinition,
    spec: &GoalSpec,
    policy: &P,
    reward: &RewardSource,
    seed: u64,
    gamma: f64,
    buf: &mut Buffers,
) -> EpisodeResult {
    let mut state = EnvState::new(env, spec, seed);
    state.write_observation(env, &mut buf.obs);
    let mut ret = 0.0;
    let mut discount = 1.0;
    let mut success = false;
    loop {
        policy.act(&state, &buf.obs, &mut buf.action);
        let flags = state.advance(env, &buf.action);
        state.write_observation(env, &mut buf.obs);
        success |= flags.success;
        let r = match reward {
            RewardSource::Program(p) => match p.evaluate_raw(&buf.obs, &buf.action, &mut buf.scratch) {
                Ok(r) => r,
                Err(fault) => {
                    return EpisodeResult {
                        discounted_return: f64::NEG_INFINITY,
                        steps: state.steps,
                        success,
                        fault: Some(fault),
                    }
                }
            },
            RewardSource::SuccessIndicator => f64::from(u8::from(flags.success)),
        };
        ret += discount * r;
        discount *= gamma;
        if flags.terminated {
            break;
        }
    }
    EpisodeResult {
        discounted_return: ret,
        steps: state.steps,
        success,
        fault: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub success: bool,
    /// Discounted return under the supplied reward program; NaN when it faulted or none was supplied.
    pub discounted_return: f64,
    pub fault: Option<String>,
}

impl Episode {
    pub fn steps(&self) -> usize {
        self.transitions.len()
    }

    pub fn faulted(&self) -> bool {
        self.fault.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub episodes: Vec<Episode>,
}

impl TrajectoryBatch {
    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(Episode::steps).sum()
    }
}

/// Records `n_episodes` full episodes with seeds `seed..seed+n_episodes`. A reward fault
/// is recorded on its episode and stops return accumulation but not the episode.
pub fn rollout<P: Policy + ?Sized>(
    policy: &P,
    env: &EnvironmentDefinition,
    spec: &GoalSpec,
    reward: Option<&TypedProgram>,
    n_episodes: usize,
    seed: u64,
    gamma: f64,
) -> Result<TrajectoryBatch, EnvError> {
    env.validate_goal_spec(spec)?;
    let mut scratch = reward.map(TypedProgram::scratch).unwrap_or_default();
    let mut episodes = Vec::with_capacity(n_episodes);
    let mut action = vec![0.0; env.action_dims];
    for i in 0..n_episodes as u64 {
        let mut state = EnvState::new(env, spec, seed.wrapping_add(i));
        let mut obs = state.observe(env);
        let mut transitions = Vec::new();
        let mut ret = if reward.is_some() { 0.0 } else { f64::NAN };
        let mut discount = 1.0;
        let mut fault = None;
        let mut success = false;
        loop {
            policy.act(&state, &obs.values, &mut action);
            let flags = state.advance(env, &action);
            let next = state.observe(env);
            success |= flags.success;
            let t = Transition {
                observation: obs,
                action: action.clone(),
                next_observation: next.clone(),
                terminated: flags.terminated,
                success: flags.success,
            };
            if let (Some(p), None) = (reward, fault) {
                match p.evaluate_raw(&next.values, &action, &mut scratch) {
                    Ok(r) => ret += discount * r,
                    Err(f) => {
                        fault = Some(f);
                        ret = f64::NAN;
                    }
                }
            }
            discount *= gamma;
            transitions.push(t);
            obs = next;
            if flags.terminated {
                break;
            }
        }
        episodes.push(Episode {
            transitions,
            success,
            discounted_return: ret,
            fault: fault.map(|f| f.to_string()),
        });
    }
    Ok(TrajectoryBatch { episodes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub success_rate: f64,
    pub mean_sparse_return: f64,
    pub mean_episode_length: f64,
}

/// Success rate and mean discounted sparse return on the environment's target goal
/// distribution, over episodes seeded `seed..seed+n_episodes`.
pub fn evaluate_target<P: Policy + ?Sized>(
    policy: &P,
    env: &EnvironmentDefinition,
    n_episodes: usize,
    seed: u64,
    gamma: f64,
) -> TargetMetrics {
    let reward = RewardSource::SuccessIndicator;
    let mut buf = Buffers::new(env, &reward);
    let (mut successes, mut ret, mut steps) = (0usize, 0.0, 0usize);
    for i in 0..n_episodes as u64 {
        let r = run_episode(env, &env.target_goal_spec, policy, &reward, seed.wrapping_add(i), gamma, &mut buf);
        successes += usize::from(r.success);
        ret += r.discounted_return;
        steps += r.steps;
    }
    let n = n_episodes.max(1) as f64;
    TargetMetrics {
        success_rate: successes as f64 / n,
        mean_sparse_return: ret / n,
        mean_episode_length: steps as f64 / n,
    }
}
