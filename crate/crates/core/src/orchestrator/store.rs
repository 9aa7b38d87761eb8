use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{OrchestratorError, RunMode, TargetRow};

pub(crate) const MANIFEST: &str = "manifest.json";
pub(crate) const CONFIG: &str = "config.json";
pub(crate) const CURRICULUM: &str = "curriculum.json";
pub(crate) const HISTORY: &str = "history.json";
pub(crate) const TARGET_CSV: &str = "target_metrics.csv";
pub(crate) const RUN_LOG: &str = "run.log";
const LOCK: &str = ".lock";
const FORMAT_VERSION: u32 = 1;

/// Commit record, rewritten after every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Manifest {
    pub format_version: u32,
    pub mode: RunMode,
    pub env_id: String,
    pub curriculum_length: Option<usize>,
    pub completed_subtasks: usize,
    pub complete: bool,
    pub total_env_steps: u64,
    pub target_metrics: Vec<TargetRow>,
}

impl Manifest {
    pub fn new(mode: RunMode, env_id: &str) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            mode,
            env_id: env_id.to_string(),
            curriculum_length: None,
            completed_subtasks: 0,
            complete: false,
            total_env_steps: 0,
            target_metrics: Vec::new(),
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OrchestratorError + '_ {
    move |source| OrchestratorError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn subtask_dir(root: &Path, subtask: usize) -> PathBuf {
    root.join(format!("subtask_{subtask:02}"))
}

pub(crate) fn candidate_dir(root: &Path, subtask: usize, candidate: usize) -> PathBuf {
    subtask_dir(root, subtask).join(format!("candidate_{candidate}"))
}

/// Writes through a temporary file so a crash never leaves a half-written artifact.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), OrchestratorError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OrchestratorError> {
    let text = serde_json::to_string_pretty(value).expect("run records serialize");
    write_text(path, &(text + "\n"))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, OrchestratorError> {
    let text = fs::read_to_string(path)
        .map_err(|e| OrchestratorError::CorruptRunDirectory(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| OrchestratorError::CorruptRunDirectory(format!("{}: {e}", path.display())))
}

/// Exclusive ownership of a run directory for the lifetime of the guard.
pub(crate) struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(root: &Path) -> Result<Self, OrchestratorError> {
        let path = root.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(OrchestratorError::Locked(root.to_path_buf())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Append-only log; the only artifact that carries wall-clock time.
pub(crate) struct RunLog {
    file: File,
}

impl RunLog {
    pub fn open(root: &Path) -> Result<Self, OrchestratorError> {
        let path = root.join(RUN_LOG);
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        Ok(Self { file })
    }

    pub fn line(&mut self, msg: &str) {
        log::info!("{msg}");
        let t = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        let _ = writeln!(self.file, "[{}.{:03}] {msg}", t.as_secs(), t.subsec_millis());
    }
}

/// True for a missing directory or one with no entries.
pub(crate) fn is_empty_dir(root: &Path) -> Result<bool, OrchestratorError> {
    match fs::read_dir(root) {
        Ok(mut it) => Ok(it.next().is_none()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(true),
        Err(e) => Err(io_err(root)(e)),
    }
}
