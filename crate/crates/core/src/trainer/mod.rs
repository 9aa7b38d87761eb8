//! Cross-entropy-method policy search over a linear-tanh policy, plus rollouts
//! and target-task evaluation.

mod cem;
mod episode;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{RewardFault, TypedProgram};
use crate::env::{EnvError, EnvState, EnvironmentDefinition};
use crate::par::Exec;

pub use cem::{train, CurveRow, TrainOutcome};
pub use episode::{evaluate_target, rollout, Episode, TargetMetrics, TrajectoryBatch};
pub use scripted::WaypointController;

pub const ARCHITECTURE: &str = "linear-tanh-v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("every population member faulted in the first iteration: {0}")]
    TaskCodeRuntimeFault(RewardFault),
    #[error("checkpoint does not fit environment `{env}`: {reason}")]
    ArchitectureMismatch { env: String, reason: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub subtask: usize,
    pub candidate: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub architecture: String,
    pub env_id: String,
    pub feature_dims: usize,
    pub action_dims: usize,
    pub params: Vec<f64>,
    pub provenance: Provenance,
}

impl PolicyCheckpoint {
    pub fn param_count(env: &EnvironmentDefinition) -> usize {
        env.action_dims * (env.observation_dims() + 1)
    }

    /// All-zero policy: every action is 0.
    pub fn zeros(env: &EnvironmentDefinition) -> Self {
        Self {
            architecture: ARCHITECTURE.to_string(),
            env_id: env.id.clone(),
            feature_dims: env.observation_dims(),
            action_dims: env.action_dims,
            params: vec![0.0; Self::param_count(env)],
            provenance: Provenance::default(),
        }
    }

    pub fn with_params(env: &EnvironmentDefinition, params: Vec<f64>) -> Self {
        Self {
            params,
            ..Self::zeros(env)
        }
    }

    pub fn check(&self, env: &EnvironmentDefinition) -> Result<(), TrainError> {
        let fail = |reason: String| {
            Err(TrainError::ArchitectureMismatch {
                env: env.id.clone(),
                reason,
            })
        };
        if self.architecture != ARCHITECTURE {
            return fail(format!("architecture `{}`", self.architecture));
        }
        if self.env_id != env.id {
            return fail(format!("checkpoint was trained on `{}`", self.env_id));
        }
        if self.feature_dims != env.observation_dims() || self.action_dims != env.action_dims {
            return fail(format!("shape {}x{}", self.action_dims, self.feature_dims));
        }
        if self.params.len() != Self::param_count(env) {
            return fail(format!("{} parameters, expected {}", self.params.len(), Self::param_count(env)));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return fail("non-finite parameter".into());
        }
        Ok(())
    }

    pub fn policy(&self) -> LinearTanhPolicy<'_> {
        LinearTanhPolicy {
            params: &self.params,
            features: self.feature_dims,
        }
    }
}

/// Anything that maps the current state to an action.
pub trait Policy: Sync {
    fn act(&self, state: &EnvState, obs: &[f64], action: &mut [f64]);
}

/// `action = tanh(W obs + b)` with `(W | b)` stored row-major.
#[derive(Debug, Clone, Copy)]
pub struct LinearTanhPolicy<'a> {
    pub params: &'a [f64],
    pub features: usize,
}

impl Policy for LinearTanhPolicy<'_> {
    #[inline]
    fn act(&self, _state: &EnvState, obs: &[f64], action: &mut [f64]) {
        let stride = self.features + 1;
        for (a, row) in action.iter_mut().zip(self.params.chunks_exact(stride)) {
            let mut z = row[self.features];
            for (w, x) in row[..self.features].iter().zip(obs) {
                z += w * x;
            }
            *a = z.tanh();
        }
    }
}

/// Reward used as the training signal.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardSource {
    Program(TypedProgram),
    /// 1 on steps that end in success, else 0.
    SuccessIndicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub population: usize,
    pub elite_count: usize,
    pub iterations: usize,
    pub episodes_per_fitness: usize,
    pub sigma_init_fresh: f64,
    pub sigma_init_warm: f64,
    pub sigma_min: f64,
    pub gamma: f64,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            population: 64,
            elite_count: 8,
            iterations: 30,
            episodes_per_fitness: 4,
            sigma_init_fresh: 0.5,
            sigma_init_warm: 0.2,
            sigma_min: 0.02,
            gamma: 0.99,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.population == 0 || self.elite_count == 0 || self.elite_count > self.population {
            return bad("need 0 < elite_count <= population");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        let sigmas = [self.sigma_init_fresh, self.sigma_init_warm, self.sigma_min];
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("sigmas must be positive");
        }
        if self.episodes_per_fitness == 0 {
            return bad("episodes_per_fitness must be positive");
        }
        Ok(())
    }
}
