//! Prompt rendering, chat-completion backends and response parsing.

mod backend;
mod parse;
mod prompts;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    parse_backend_spec, BackendSpec, FixtureEntry, FixtureSet, LiveBackend, ReplayBackend, ScriptedBackend, API_KEY_VAR,
};
pub use parse::{parse_curriculum, parse_decision, Curriculum, Decision, ParseError, TaskSpec, MAX_TASKS, SOFT_MAX_TASKS};
pub use prompts::{curriculum_request, evaluation_request, task_code_request, HistoryItem, PromptSettings};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend answered with HTTP status {0}")]
    NonSuccessStatus(u16),
    #[error("no fixture left for {stage} subtask {subtask} attempt {attempt}")]
    FixtureExhausted { stage: Stage, subtask: usize, attempt: usize },
    #[error("no fixture recorded for {stage} subtask {subtask}")]
    FixtureKeyMissing { stage: Stage, subtask: usize },
    #[error("fixture file: {0}")]
    Fixture(String),
    #[error("prompt context is missing `{0}`")]
    MissingContextField(&'static str),
    #[error("environment variable {0} is not set")]
    MissingApiKey(&'static str),
    #[error("malformed backend response: {0}")]
    BadResponse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Curriculum,
    TaskCode,
    Evaluation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Curriculum => "curriculum",
            Stage::TaskCode => "task_code",
            Stage::Evaluation => "evaluation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub candidate_count: usize,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::MissingContextField("messages"));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::MissingContextField("temperature"));
        }
        Ok(())
    }

    /// All message contents joined, as written to the run directory.
    pub fn transcript(&self) -> String {
        let parts: Vec<String> = self
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                };
                format!("[{role}]\n{}", m.content)
            })
            .collect();
        parts.join("\n\n")
    }
}

/// Identifies a call for fixture lookup. `attempt` counts calls already made for
/// the same `(stage, subtask)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallKey {
    pub stage: Stage,
    pub subtask: usize,
    pub attempt: usize,
}

pub trait Backend: Send {
    /// Returns up to `req.candidate_count` completions.
    fn complete(&mut self, key: CallKey, req: &ChatRequest) -> Result<Vec<String>, LlmError>;

    /// Network requests issued so far (0 for offline backends).
    fn network_calls(&self) -> usize {
        0
    }
}

/// Serial dispatch queue in front of one backend. Assigns attempt numbers per
/// `(stage, subtask)` so fixture lookups never depend on caller timing.
pub struct Gateway {
    inner: Mutex<GatewayState>,
}

struct GatewayState {
    backend: Box<dyn Backend>,
    attempts: BTreeMap<(Stage, usize), usize>,
    calls: usize,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Self {
            inner: Mutex::new(GatewayState {
                backend,
                attempts: BTreeMap::new(),
                calls: 0,
            }),
        }
    }

    pub fn complete(&self, stage: Stage, subtask: usize, req: &ChatRequest) -> Result<Vec<String>, LlmError> {
        req.validate()?;
        let mut state = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let counter = state.attempts.entry((stage, subtask)).or_insert(0);
        let key = CallKey {
            stage,
            subtask,
            attempt: *counter,
        };
        *counter += 1;
        state.calls += 1;
        log::debug!("backend call {stage} subtask {subtask} attempt {}", key.attempt);
        state.backend.complete(key, req)
    }

    /// Calls issued through this gateway.
    pub fn calls(&self) -> usize {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).calls
    }

    pub fn network_calls(&self) -> usize {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).backend.network_calls()
    }
}
