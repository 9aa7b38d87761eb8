//! Deterministic goal-conditioned point environments.
//!
//! Every environment publishes a registry of named state variables with raw
//! bounds. Observations are the registry values normalized to `[-1, 1]`, and
//! the same registry grounds the reward DSL and the prompts shown to the
//! language model.

mod builtin;
mod grid;
mod state;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{builtin, builtin_ids, point_maze, point_open, point_push};
pub use grid::GridLayout;
pub use state::{EnvState, StepFlags};

/// Name of the liveness variable every environment must expose.
pub const IS_ALIVE: &str = "is_alive";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown goal dimension `{0}`")]
    UnknownDimension(String),
    #[error("goal range for `{name}` is inverted: [{lo}, {hi}]")]
    InvertedRange { name: String, lo: f64, hi: f64 },
    #[error("goal range for `{name}` [{lo}, {hi}] exceeds allowed [{min}, {max}]")]
    RangeOutOfBounds {
        name: String,
        lo: f64,
        hi: f64,
        min: f64,
        max: f64,
    },
    #[error("goal range for `{name}` [{lo}, {hi}] admits no goal")]
    EmptyGoalRegion { name: String, lo: f64, hi: f64 },
    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),
    #[error("action has {got} components, environment expects {expected}")]
    ActionDims { expected: usize, got: usize },
}

/// One named entry of an environment's state-variable registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVariable {
    pub name: String,
    pub dims: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub description: String,
}

impl StateVariable {
    fn uniform(name: &str, dims: usize, lo: f64, hi: f64, description: &str) -> Self {
        Self {
            name: name.to_string(),
            dims,
            lower: vec![lo; dims],
            upper: vec![hi; dims],
            description: description.to_string(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.dims == 1
    }
}

/// A goal-distribution dimension and the range a task may draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalDimension {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub description: String,
}

/// Per-dimension sampling ranges for goals at episode reset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub ranges: BTreeMap<String, (f64, f64)>,
}

impl GoalSpec {
    pub fn single(name: &str, lo: f64, hi: f64) -> Self {
        let mut ranges = BTreeMap::new();
        ranges.insert(name.to_string(), (lo, hi));
        Self { ranges }
    }

    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.ranges.get(name).copied()
    }

    /// One `NAME: [lo, hi]` line per dimension, the same shape the goal fence uses.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (name, (lo, hi)) in &self.ranges {
            let _ = writeln!(out, "{name}: [{lo}, {hi}]");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminateOn {
    Failure,
    Success,
}

/// Physical layout behind an environment definition.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    /// Point mass moving through a grid of unit cells.
    Grid(GridLayout),
    /// Point-mass pusher disc and a quasi-static block disc in a square workspace.
    Push(PushLayout),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushLayout {
    pub size: f64,
    pub agent_radius: f64,
    pub block_radius: f64,
    pub agent_start: [f64; 2],
    pub block_start: [f64; 2],
    pub success_radius: f64,
}

/// Shared kinematic constants of the point-mass agent.
pub const MAX_SPEED: f64 = 1.0;
pub const ACCELERATION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentDefinition {
    pub id: String,
    pub variables: Vec<StateVariable>,
    pub action_dims: usize,
    pub goal_dims: Vec<GoalDimension>,
    pub horizon: usize,
    pub dt: f64,
    pub target_goal_spec: GoalSpec,
    pub env_description: String,
    pub target_description: String,
    pub terminate_on: TerminateOn,
    pub dynamics: Dynamics,
    offsets: Vec<usize>,
}

impl EnvironmentDefinition {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        id: &str,
        variables: Vec<StateVariable>,
        action_dims: usize,
        goal_dims: Vec<GoalDimension>,
        horizon: usize,
        dt: f64,
        target_goal_spec: GoalSpec,
        env_description: &str,
        target_description: &str,
        terminate_on: TerminateOn,
        dynamics: Dynamics,
    ) -> Self {
        let mut offsets = Vec::with_capacity(variables.len());
        let mut next = 0;
        for v in &variables {
            offsets.push(next);
            next += v.dims;
        }
        let def = Self {
            id: id.to_string(),
            variables,
            action_dims,
            goal_dims,
            horizon,
            dt,
            target_goal_spec,
            env_description: env_description.to_string(),
            target_description: target_description.to_string(),
            terminate_on,
            dynamics,
            offsets,
        };
        debug_assert!(def.check_registry().is_ok());
        def
    }

    /// Registry invariants: unique names, ordered bounds, `is_alive` present as a unit scalar.
    pub fn check_registry(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                return Err(format!("duplicate variable `{}`", v.name));
            }
            if v.dims == 0 || v.lower.len() != v.dims || v.upper.len() != v.dims {
                return Err(format!("bad dims for `{}`", v.name));
            }
            if v.lower.iter().zip(&v.upper).any(|(lo, hi)| lo >= hi) {
                return Err(format!("bounds of `{}` are not ordered", v.name));
            }
        }
        match self.variable(IS_ALIVE) {
            Some(v) if v.dims == 1 && v.lower[0] == 0.0 && v.upper[0] == 1.0 => {}
            _ => return Err("is_alive must be a scalar with bounds [0, 1]".into()),
        }
        if self.horizon == 0 {
            return Err("horizon must be positive".into());
        }
        self.validate_goal_spec(&self.target_goal_spec)
            .map_err(|e| e.to_string())
    }

    pub fn variable(&self, name: &str) -> Option<&StateVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Index of a variable in registry order.
    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Offset of a variable's first component inside a flat observation.
    pub fn offset(&self, index: usize) -> usize {
        self.offsets[index]
    }

    /// Total number of observation components.
    pub fn observation_dims(&self) -> usize {
        self.variables.iter().map(|v| v.dims).sum()
    }

    pub fn goal_dimension(&self, name: &str) -> Option<&GoalDimension> {
        self.goal_dims.iter().find(|g| g.name == name)
    }

    /// Checks a goal spec against the declared goal dimensions.
    pub fn validate_goal_spec(&self, spec: &GoalSpec) -> Result<(), EnvError> {
        for (name, &(lo, hi)) in &spec.ranges {
            let dim = self
                .goal_dimension(name)
                .ok_or_else(|| EnvError::UnknownDimension(name.clone()))?;
            // also rejects NaN bounds
            if lo.partial_cmp(&hi).is_none_or(|o| o.is_gt()) {
                return Err(EnvError::InvertedRange {
                    name: name.clone(),
                    lo,
                    hi,
                });
            }
            if lo < dim.min || hi > dim.max {
                return Err(EnvError::RangeOutOfBounds {
                    name: name.clone(),
                    lo,
                    hi,
                    min: dim.min,
                    max: dim.max,
                });
            }
        }
        if let Dynamics::Grid(grid) = &self.dynamics {
            let (lo, hi) = self.goal_range(spec, "goal_distance");
            if grid.admissible_goals(lo, hi).is_empty() {
                return Err(EnvError::EmptyGoalRegion {
                    name: "goal_distance".into(),
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Range for a goal dimension, falling back to the target range when a goal spec omits it.
    pub(crate) fn goal_range(&self, spec: &GoalSpec, name: &str) -> (f64, f64) {
        spec.get(name)
            .or_else(|| self.target_goal_spec.get(name))
            .unwrap_or((0.0, 0.0))
    }

    /// Starts an episode. Deterministic in `(self, spec, seed)`.
    pub fn reset(&self, spec: &GoalSpec, seed: u64) -> Result<EnvState, EnvError> {
        self.validate_goal_spec(spec)?;
        Ok(EnvState::new(self, spec, seed))
    }

    /// `reset` plus the initial observation.
    pub fn reset_env(&self, spec: &GoalSpec, seed: u64) -> Result<(EnvState, Observation), EnvError> {
        let state = self.reset(spec, seed)?;
        let obs = state.observe(self);
        Ok((state, obs))
    }

    /// Maps a raw value into `[-1, 1]` using the bounds of component `component` of variable `index`.
    pub fn normalize(&self, index: usize, component: usize, raw: f64) -> f64 {
        let v = &self.variables[index];
        normalize(raw, v.lower[component], v.upper[component])
    }

    /// Human-readable description of the robot, its variables, goal dimensions and target task.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        out.push_str(self.env_description.trim());
        out.push_str("\n\nState variables (all normalized to [-1, 1] from the raw bounds shown):\n");
        for v in &self.variables {
            let bounds = if v.lower.iter().all(|&l| l == v.lower[0])
                && v.upper.iter().all(|&u| u == v.upper[0])
            {
                format!("[{}, {}]", v.lower[0], v.upper[0])
            } else {
                let pairs: Vec<String> = v
                    .lower
                    .iter()
                    .zip(&v.upper)
                    .map(|(l, u)| format!("[{l}, {u}]"))
                    .collect();
                pairs.join(" ")
            };
            let _ = writeln!(
                out,
                "{}: {} (dims {}, raw bounds {})",
                v.name, v.description, v.dims, bounds
            );
        }
        let _ = writeln!(out, "action: commanded acceleration, {} dims in [-1, 1]", self.action_dims);
        out.push_str("\nGoal distribution dimensions:\n");
        for g in &self.goal_dims {
            let _ = writeln!(out, "{}: {} (allowed range [{}, {}])", g.name, g.description, g.min, g.max);
        }
        out.push_str("\nTarget task:\n");
        out.push_str(self.target_description.trim());
        out.push_str("\nTarget goal distribution:\n");
        out.push_str(&self.target_goal_spec.to_lines());
        out
    }
}

/// `clamp(2 (v - lo) / (hi - lo) - 1, -1, 1)`.
pub fn normalize(raw: f64, lo: f64, hi: f64) -> f64 {
    let x = 2.0 * (raw - lo) / (hi - lo) - 1.0;
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-1.0, 1.0)
    }
}

/// Normalized values of every registry variable, flattened in registry order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
}

impl Observation {
    /// Components of one variable.
    pub fn get<'a>(&'a self, env: &EnvironmentDefinition, name: &str) -> Option<&'a [f64]> {
        let idx = env.variable_index(name)?;
        let off = env.offset(idx);
        Some(&self.values[off..off + env.variables[idx].dims])
    }

    pub fn to_map(&self, env: &EnvironmentDefinition) -> BTreeMap<String, Vec<f64>> {
        env.variables
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let off = env.offset(i);
                (v.name.clone(), self.values[off..off + v.dims].to_vec())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Observation,
    pub action: Vec<f64>,
    pub next_observation: Observation,
    pub terminated: bool,
    pub success: bool,
}

/// Advances one step and packages the result as a [`Transition`].
pub fn step_env(env: &EnvironmentDefinition, state: &mut EnvState, action: &[f64]) -> Result<Transition, EnvError> {
    if action.len() != env.action_dims {
        return Err(EnvError::ActionDims {
            expected: env.action_dims,
            got: action.len(),
        });
    }
    let observation = state.observe(env);
    let clamped: Vec<f64> = action.iter().map(|a| sanitize_action(*a)).collect();
    let flags = state.advance(env, &clamped);
    Ok(Transition {
        observation,
        action: clamped,
        next_observation: state.observe(env),
        terminated: flags.terminated,
        success: flags.success,
    })
}

pub(crate) fn sanitize_action(a: f64) -> f64 {
    if a.is_nan() {
        0.0
    } else {
        a.clamp(-1.0, 1.0)
    }
}
