use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, CallKey, ChatRequest, LlmError, Stage};

pub const API_KEY_VAR: &str = "CURRICULLM_API_KEY";
const FIXTURE_FILE: &str = "fixtures.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub stage: Stage,
    pub subtask: usize,
    pub attempt: usize,
    pub responses: Vec<String>,
}

/// Responses keyed by `(stage, subtask, attempt)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureSet {
    pub entries: Vec<FixtureEntry>,
}

impl FixtureSet {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path).map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let mut sorted = self.clone();
        sorted.entries.sort_by_key(|e| (e.stage, e.subtask, e.attempt));
        let text = serde_json::to_string_pretty(&sorted).map_err(|e| LlmError::Fixture(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))
    }

    pub fn push(&mut self, stage: Stage, subtask: usize, attempt: usize, responses: Vec<String>) {
        self.entries.push(FixtureEntry {
            stage,
            subtask,
            attempt,
            responses,
        });
    }

    pub fn get(&self, key: CallKey) -> Result<&[String], LlmError> {
        let mut seen = false;
        for e in &self.entries {
            if e.stage == key.stage && e.subtask == key.subtask {
                if e.attempt == key.attempt {
                    return Ok(&e.responses);
                }
                seen = true;
            }
        }
        Err(if seen {
            LlmError::FixtureExhausted {
                stage: key.stage,
                subtask: key.subtask,
                attempt: key.attempt,
            }
        } else {
            LlmError::FixtureKeyMissing {
                stage: key.stage,
                subtask: key.subtask,
            }
        })
    }
}

/// Answers from a fixture file; never touches the network.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    fixtures: FixtureSet,
}

impl ScriptedBackend {
    pub fn new(fixtures: FixtureSet) -> Self {
        Self { fixtures }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(FixtureSet::load(path)?))
    }
}

impl Backend for ScriptedBackend {
    fn complete(&mut self, key: CallKey, req: &ChatRequest) -> Result<Vec<String>, LlmError> {
        let responses = self.fixtures.get(key)?;
        Ok(responses.iter().take(req.candidate_count.max(1)).cloned().collect())
    }
}

/// OpenAI-compatible chat-completions client.
pub struct LiveBackend {
    base_url: String,
    api_key: String,
    client: reqwest::blocking::Client,
    pub max_attempts: usize,
    pub backoff: Duration,
    calls: usize,
}

impl LiveBackend {
    /// Reads the API key from [`API_KEY_VAR`].
    pub fn from_env(base_url: &str) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_VAR).map_err(|_| LlmError::MissingApiKey(API_KEY_VAR))?;
        Self::new(base_url, &key)
    }

    pub fn new(base_url: &str, api_key: &str) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            client,
            max_attempts: 4,
            backoff: Duration::from_millis(500),
            calls: 0,
        })
    }

    fn post_once(&mut self, req: &ChatRequest) -> Result<Vec<String>, (LlmError, bool)> {
        self.calls += 1;
        let body = json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "n": req.candidate_count.max(1),
        });
        let resp = self
            .client
            .post(format!("{}/v1/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| (LlmError::Transport(e.to_string()), true))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.as_u16() == 429 || status.is_server_error();
            return Err((LlmError::NonSuccessStatus(status.as_u16()), retry));
        }
        let value: serde_json::Value = resp.json().map_err(|e| (LlmError::BadResponse(e.to_string()), false))?;
        let choices = value["choices"]
            .as_array()
            .ok_or_else(|| (LlmError::BadResponse("no `choices` array".into()), false))?;
        let texts: Vec<String> = choices
            .iter()
            .filter_map(|c| c["message"]["content"].as_str().map(str::to_string))
            .collect();
        if texts.is_empty() {
            return Err((LlmError::BadResponse("no message content in choices".into()), false));
        }
        Ok(texts)
    }
}

impl Backend for LiveBackend {
    fn complete(&mut self, _key: CallKey, req: &ChatRequest) -> Result<Vec<String>, LlmError> {
        let mut delay = self.backoff;
        let mut attempt = 1;
        loop {
            match self.post_once(req) {
                Ok(texts) => return Ok(texts),
                Err((err, retry)) if retry && attempt < self.max_attempts => {
                    log::warn!("backend call failed ({err}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err((err, _)) => return Err(err),
            }
        }
    }

    fn network_calls(&self) -> usize {
        self.calls
    }
}

/// Replays stored responses; misses go to the live backend (when configured) and are recorded.
pub struct ReplayBackend {
    dir: PathBuf,
    store: FixtureSet,
    live: Option<LiveBackend>,
}

impl ReplayBackend {
    pub fn open(dir: &Path, live: Option<LiveBackend>) -> Result<Self, LlmError> {
        fs::create_dir_all(dir).map_err(|e| LlmError::Fixture(format!("{}: {e}", dir.display())))?;
        let path = dir.join(FIXTURE_FILE);
        let store = if path.exists() {
            FixtureSet::load(&path)?
        } else {
            FixtureSet::default()
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            store,
            live,
        })
    }
}

impl Backend for ReplayBackend {
    fn complete(&mut self, key: CallKey, req: &ChatRequest) -> Result<Vec<String>, LlmError> {
        match self.store.get(key) {
            Ok(r) => return Ok(r.to_vec()),
            Err(e) if self.live.is_none() => return Err(e),
            Err(_) => {}
        }
        let live = self.live.as_mut().expect("checked above");
        let responses = live.complete(key, req)?;
        self.store.push(key.stage, key.subtask, key.attempt, responses.clone());
        self.store.save(&self.dir.join(FIXTURE_FILE))?;
        Ok(responses)
    }

    fn network_calls(&self) -> usize {
        self.live.as_ref().map_or(0, |l| l.network_calls())
    }
}

/// Parsed `--backend` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    /// `live:<url>,<model>`
    Live { url: String, model: String },
    /// `scripted:<fixture-path>`
    Scripted { path: PathBuf },
    /// `replay:<dir>` or `replay:<dir>;<url>,<model>` to record misses from a live endpoint.
    Replay { dir: PathBuf, live: Option<(String, String)> },
}

impl BackendSpec {
    pub fn model(&self) -> &str {
        match self {
            BackendSpec::Live { model, .. } => model,
            BackendSpec::Replay { live: Some((_, model)), .. } => model,
            _ => "scripted",
        }
    }

    pub fn is_offline(&self) -> bool {
        matches!(self, BackendSpec::Scripted { .. } | BackendSpec::Replay { live: None, .. })
    }

    pub fn connect(&self) -> Result<Box<dyn Backend>, LlmError> {
        Ok(match self {
            BackendSpec::Live { url, .. } => Box::new(LiveBackend::from_env(url)?),
            BackendSpec::Scripted { path } => Box::new(ScriptedBackend::from_file(path)?),
            BackendSpec::Replay { dir, live } => {
                let live = live.as_ref().map(|(url, _)| LiveBackend::from_env(url)).transpose()?;
                Box::new(ReplayBackend::open(dir, live)?)
            }
        })
    }
}

fn url_and_model(s: &str) -> Option<(String, String)> {
    let (url, model) = s.rsplit_once(',')?;
    (!url.is_empty() && !model.is_empty()).then(|| (url.to_string(), model.to_string()))
}

pub fn parse_backend_spec(s: &str) -> Result<BackendSpec, LlmError> {
    let bad = || LlmError::Fixture(format!("backend `{s}` must be live:<url>,<model> | scripted:<path> | replay:<dir>"));
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    match kind {
        "live" => {
            let (url, model) = url_and_model(rest).ok_or_else(bad)?;
            Ok(BackendSpec::Live { url, model })
        }
        "scripted" if !rest.is_empty() => Ok(BackendSpec::Scripted { path: rest.into() }),
        "replay" => match rest.split_once(';') {
            Some((dir, live)) => Ok(BackendSpec::Replay {
                dir: dir.into(),
                live: Some(url_and_model(live).ok_or_else(bad)?),
            }),
            None if !rest.is_empty() => Ok(BackendSpec::Replay {
                dir: rest.into(),
                live: None,
            }),
            None => Err(bad()),
        },
        _ => Err(bad()),
    }
}
