//! End-to-end runs: curriculum generation, per-subtask candidate training and
//! selection, persistence and resume.

mod pipeline;
mod report;
mod store;

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{builtin, EnvError};
use crate::llm::{parse_backend_spec, LlmError, ParseError, PromptSettings, Stage, TaskSpec};
use crate::stats::TrajectorySummary;
use crate::trainer::{PolicyCheckpoint, TargetMetrics, TrainConfig, TrainError};

pub use pipeline::{
    evaluate_run, load_policy, resume, resume_with_gateway, run, run_with_gateway, select_best, RunOptions, Selection,
    SelectionMethod,
};
pub use report::{report, Report};

/// Candidates per subtask may not exceed this.
pub const MAX_CANDIDATES: usize = 5;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config does not match the stored run: {0}")]
    ConfigMismatch(String),
    #[error("run directory {0} is not empty")]
    RunDirectoryNotEmpty(PathBuf),
    #[error("run directory {0} is locked by another process (remove .lock if it is stale)")]
    Locked(PathBuf),
    #[error("corrupt run directory: {0}")]
    CorruptRunDirectory(String),
    #[error("curriculum response could not be parsed: {0}")]
    CurriculumParseFailure(ParseError),
    #[error("every candidate of subtask {0} failed")]
    AllCandidatesFailed(usize),
    #[error("{stage} backend call failed: {source}")]
    Backend { stage: Stage, source: LlmError },
    #[error("backend setup failed: {0}")]
    BackendSetup(LlmError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Curriculum,
    /// Task code for the target task only, with the whole training budget.
    Zeroshot,
    /// No language model; the success indicator is the reward.
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env_id: String,
    pub mode: RunMode,
    /// Master seed; every other seed is derived from it. `train.seed` is ignored.
    pub seed: u64,
    /// Task-code candidates per subtask.
    pub k: usize,
    /// Extra queries allowed per stage when a response is unusable.
    pub retries: usize,
    /// Rollouts per candidate for the statistics shown to the evaluator.
    pub eval_episodes: usize,
    /// Episodes for the recorded target-task metrics.
    pub target_episodes: usize,
    /// Zeroshot and sparse runs train for this many subtasks' worth of iterations.
    pub budget_subtasks: usize,
    pub backend: String,
    pub train: TrainConfig,
    pub prompts: PromptSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env_id: "point_maze".into(),
            mode: RunMode::Curriculum,
            seed: 0,
            k: 4,
            retries: 2,
            eval_episodes: 20,
            target_episodes: 100,
            budget_subtasks: 3,
            backend: String::new(),
            train: TrainConfig::default(),
            prompts: PromptSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        if self.k == 0 || self.k > MAX_CANDIDATES {
            return bad(format!("k must lie in 1..={MAX_CANDIDATES}, got {}", self.k));
        }
        if self.eval_episodes == 0 || self.target_episodes == 0 {
            return bad("eval_episodes and target_episodes must be positive".into());
        }
        if self.budget_subtasks == 0 {
            return bad("budget_subtasks must be positive".into());
        }
        builtin(&self.env_id).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| OrchestratorError::Config(e.to_string()))?;
        if self.mode != RunMode::Sparse {
            parse_backend_spec(&self.backend).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Differences that matter for resuming; the backend may change between sessions.
    fn mismatch(&self, other: &RunConfig) -> Option<String> {
        let a = serde_json::to_value(RunConfig {
            backend: String::new(),
            ..self.clone()
        })
        .ok()?;
        let b = serde_json::to_value(RunConfig {
            backend: String::new(),
            ..other.clone()
        })
        .ok()?;
        let (a, b) = (a.as_object()?, b.as_object()?);
        let keys: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
        (!keys.is_empty()).then(|| {
            keys.iter()
                .map(|k| format!("{k}: stored {} vs given {}", a[*k], b[*k]))
                .collect::<Vec<_>>()
                .join("; ")
        })
    }
}

/// A completed subtask: the task, the selected code and what its policy did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub task: TaskSpec,
    /// Canonical task code; re-parses against the environment.
    pub selected_code: String,
    pub selected_summary: TrajectorySummary,
    pub selected_candidate: usize,
}

/// Target-task metrics of the policy selected after a subtask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub subtask: usize,
    pub task: String,
    pub selected_candidate: usize,
    pub metrics: TargetMetrics,
    /// Training steps spent on the subtask, summed over its candidates.
    pub env_steps: u64,
}

impl TargetRow {
    pub const CSV_HEADER: &'static str =
        "subtask,task,selected_candidate,success_rate,mean_sparse_return,mean_episode_length,env_steps";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.subtask,
            csv_field(&self.task),
            self.selected_candidate,
            self.metrics.success_rate,
            self.metrics.mean_sparse_return,
            self.metrics.mean_episode_length,
            self.env_steps
        )
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn target_csv(rows: &[TargetRow]) -> String {
    let mut out = String::from(TargetRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub config: RunConfig,
    pub curriculum: Option<crate::llm::Curriculum>,
    pub history: Vec<HistoryEntry>,
    /// Policy selected after the last completed subtask.
    pub policy: Option<PolicyCheckpoint>,
    pub target_metrics: Vec<TargetRow>,
    pub total_env_steps: u64,
    pub complete: bool,
    /// Backend calls made in this session (not persisted).
    pub backend_calls: usize,
}

impl RunState {
    pub fn completed_subtasks(&self) -> usize {
        self.target_metrics.len()
    }

    /// Target metrics after the last completed subtask.
    pub fn final_metrics(&self) -> Option<&TargetMetrics> {
        self.target_metrics.last().map(|r| &r.metrics)
    }
}
