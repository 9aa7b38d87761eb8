use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::{
    candidate_dir, io_err, is_empty_dir, read_json, subtask_dir, write_json, write_text, Manifest, RunLock, RunLog,
    CONFIG, CURRICULUM, HISTORY, MANIFEST, TARGET_CSV,
};
use super::{target_csv, HistoryEntry, OrchestratorError, RunConfig, RunMode, RunState, TargetRow};
use crate::dsl::TaskCode;
use crate::env::{builtin, EnvironmentDefinition};
use crate::llm::{
    curriculum_request, evaluation_request, parse_backend_spec, parse_curriculum, parse_decision, task_code_request,
    ChatRequest, Curriculum, Gateway, HistoryItem, LlmError, PromptSettings, Stage, TaskSpec,
};
use crate::par::map_indexed;
use crate::seed::{derive_path, derive_seed};
use crate::stats::{render_summaries, summarize, TrajectorySummary};
use crate::trainer::{
    evaluate_target, rollout, train, PolicyCheckpoint, Provenance, RewardSource, TargetMetrics, TrainError,
};

// seed streams under the master seed
const STREAM_TRAIN: u64 = 2;
const STREAM_SUMMARY: u64 = 3;
const STREAM_CANDIDATE_TARGET: u64 = 4;
const STREAM_TARGET: u64 = 5;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Return once this subtask is persisted, leaving the run resumable.
    pub stop_after_subtask: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    /// Parsed from the evaluator's decision.
    Llm,
    /// Only one candidate survived; the evaluator was still asked.
    OnlyCandidate,
    /// Evaluator output unusable; highest target success rate, lowest index on ties.
    Fallback,
    /// No evaluator stage (zeroshot and sparse runs).
    TargetSuccessRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub candidate: usize,
    pub method: SelectionMethod,
    pub reason: String,
    /// Candidate index behind each agent block, in block order.
    pub agent_map: Vec<usize>,
    #[serde(skip)]
    pub prompt: Option<String>,
    #[serde(skip)]
    pub responses: Vec<String>,
}

fn best_by_target(target_success: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in target_success.iter().enumerate() {
        if v > target_success[best] {
            best = i;
        }
    }
    best
}

/// Asks the evaluator which summary fits `task` best. Never fails: unusable output or
/// backend errors fall back to the highest `target_success`, lowest position on ties.
#[allow(clippy::too_many_arguments)]
pub fn select_best(
    gateway: &Gateway,
    env: &EnvironmentDefinition,
    task: &TaskSpec,
    history: &[HistoryItem],
    summaries: &[TrajectorySummary],
    target_success: &[f64],
    subtask: usize,
    retries: usize,
    settings: &PromptSettings,
) -> Selection {
    assert!(!summaries.is_empty(), "select_best needs at least one candidate");
    let agent_map: Vec<usize> = summaries.iter().map(|s| s.candidate_index).collect();
    let mut sel = Selection {
        candidate: agent_map[best_by_target(target_success)],
        method: SelectionMethod::Fallback,
        reason: String::new(),
        agent_map,
        prompt: None,
        responses: Vec::new(),
    };
    let only = summaries.len() == 1;
    let problem = match evaluation_request(env, task, history, &render_summaries(summaries), settings) {
        Err(e) => e.to_string(),
        Ok(req) => {
            sel.prompt = Some(req.transcript());
            let mut problem = String::new();
            for _ in 0..=retries {
                match gateway.complete(Stage::Evaluation, subtask, &req) {
                    Ok(texts) => {
                        let text = texts.into_iter().next().unwrap_or_default();
                        let parsed = parse_decision(&text, summaries.len());
                        sel.responses.push(text);
                        match parsed {
                            Ok(d) => {
                                sel.candidate = sel.agent_map[d.agent_index];
                                sel.method = if only { SelectionMethod::OnlyCandidate } else { SelectionMethod::Llm };
                                sel.reason = d.reason;
                                return sel;
                            }
                            Err(e) => problem = e.to_string(),
                        }
                    }
                    Err(e) => {
                        problem = e.to_string();
                        break;
                    }
                }
            }
            problem
        }
    };
    if only {
        sel.method = SelectionMethod::OnlyCandidate;
        sel.reason = format!("only surviving candidate; evaluator output unusable: {problem}");
    } else {
        sel.reason = format!("evaluator output unusable ({problem}); picked the highest target success rate");
    }
    sel
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CandidateState {
    Trained,
    InvalidCode,
    TrainingFault,
    EvaluationFault,
}

/// Per-candidate record written to `status.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CandidateStatus {
    candidate: usize,
    state: CandidateState,
    /// Task-code queries spent on this slot.
    attempts: usize,
    error: Option<String>,
    /// Provenance of the checkpoint training started from.
    init: Option<Provenance>,
    env_steps: u64,
    best_fitness: Option<f64>,
    target: Option<TargetMetrics>,
}

struct Slot {
    raw: Option<String>,
    code: Result<TaskCode, String>,
    attempts: usize,
}

struct Candidate {
    status: CandidateStatus,
    checkpoint: Option<PolicyCheckpoint>,
    curve_csv: Option<String>,
    summary: Option<TrajectorySummary>,
}

fn join_attempts(texts: &[String]) -> String {
    match texts {
        [one] => one.clone(),
        _ => texts
            .iter()
            .enumerate()
            .map(|(i, t)| format!("=== attempt {i} ===\n{t}\n"))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

fn backend(stage: Stage) -> impl FnOnce(LlmError) -> OrchestratorError {
    move |source| OrchestratorError::Backend { stage, source }
}

fn target_task(env: &EnvironmentDefinition) -> TaskSpec {
    TaskSpec {
        index: 1,
        name: "Original task".into(),
        description: env.target_description.trim().to_string(),
        reason: "The target task, learned directly.".into(),
    }
}

struct Pipeline<'a> {
    cfg: RunConfig,
    env: EnvironmentDefinition,
    root: &'a Path,
    gateway: Option<&'a Gateway>,
    settings: PromptSettings,
    log: RunLog,
    manifest: Manifest,
    state: RunState,
}

impl<'a> Pipeline<'a> {
    fn gateway(&self) -> Result<&'a Gateway, OrchestratorError> {
        self.gateway
            .ok_or_else(|| OrchestratorError::Config(format!("{:?} runs need a backend", self.cfg.mode)))
    }

    fn commit(&mut self) -> Result<(), OrchestratorError> {
        self.manifest.completed_subtasks = self.state.completed_subtasks();
        self.manifest.total_env_steps = self.state.total_env_steps;
        self.manifest.target_metrics = self.state.target_metrics.clone();
        self.manifest.complete = self.state.complete;
        self.manifest.curriculum_length = self.state.curriculum.as_ref().map(Curriculum::len);
        if self.cfg.mode != RunMode::Sparse {
            write_json(&self.root.join(HISTORY), &self.state.history)?;
        }
        write_text(&self.root.join(TARGET_CSV), &target_csv(&self.state.target_metrics))?;
        // written last: the manifest marks the commit
        write_json(&self.root.join(MANIFEST), &self.manifest)
    }

    fn history_items(&self) -> Vec<HistoryItem> {
        self.state
            .history
            .iter()
            .map(|h| HistoryItem {
                task: h.task.clone(),
                code: h.selected_code.clone(),
            })
            .collect()
    }

    fn query_curriculum(&mut self) -> Result<Curriculum, OrchestratorError> {
        let gateway = self.gateway()?;
        let req = curriculum_request(&self.env, &self.settings).map_err(backend(Stage::Curriculum))?;
        write_text(&self.root.join("curriculum_prompt.txt"), &req.transcript())?;
        let mut responses = Vec::new();
        let mut result = Err(crate::llm::ParseError::NoTasksFound);
        for _ in 0..=self.cfg.retries {
            let texts = gateway.complete(Stage::Curriculum, 0, &req).map_err(backend(Stage::Curriculum))?;
            let text = texts.into_iter().next().unwrap_or_default();
            result = parse_curriculum(&text);
            responses.push(text);
            if result.is_ok() {
                break;
            }
        }
        write_text(&self.root.join("curriculum_response.txt"), &join_attempts(&responses))?;
        let curriculum = result.map_err(OrchestratorError::CurriculumParseFailure)?;
        self.log.line(&format!("curriculum with {} tasks", curriculum.len()));
        Ok(curriculum)
    }

    /// One request for all K slots, then re-queries for the slots whose code did not
    /// parse or typecheck, up to `retries` more rounds.
    fn sample_codes(&mut self, subtask: usize, task: &TaskSpec) -> Result<Vec<Slot>, OrchestratorError> {
        let gateway = self.gateway()?;
        let k = self.cfg.k;
        let history = self.history_items();
        let req = task_code_request(&self.env, task, &history, &self.settings, k).map_err(backend(Stage::TaskCode))?;
        write_text(&subtask_dir(self.root, subtask).join("task_code_prompt.txt"), &req.transcript())?;
        let mut slots: Vec<Slot> = (0..k)
            .map(|_| Slot {
                raw: None,
                code: Err("not sampled".into()),
                attempts: 0,
            })
            .collect();
        let mut pending: Vec<usize> = (0..k).collect();
        for round in 0..=self.cfg.retries {
            if pending.is_empty() {
                break;
            }
            let req = ChatRequest {
                candidate_count: pending.len(),
                ..req.clone()
            };
            let texts = match gateway.complete(Stage::TaskCode, subtask, &req) {
                Ok(t) => t,
                Err(e @ (LlmError::FixtureExhausted { .. } | LlmError::FixtureKeyMissing { .. })) if round > 0 => {
                    self.log.line(&format!("subtask {subtask}: no more task code to retry with ({e})"));
                    break;
                }
                Err(e) => return Err(backend(Stage::TaskCode)(e)),
            };
            let mut still = Vec::new();
            for (i, &slot) in pending.iter().enumerate() {
                let s = &mut slots[slot];
                s.attempts += 1;
                match texts.get(i) {
                    Some(text) => {
                        s.raw = Some(text.clone());
                        s.code = TaskCode::from_response(text, &self.env).map_err(|e| e.to_string());
                    }
                    None => s.code = Err("no response for this slot".into()),
                }
                if let Err(e) = &s.code {
                    self.log.line(&format!("subtask {subtask} candidate {slot} attempt {round}: {e}"));
                    still.push(slot);
                }
            }
            pending = still;
        }
        Ok(slots)
    }

    fn train_slots(
        &self,
        subtask: usize,
        slots: &[Slot],
        sparse: bool,
        iterations: usize,
    ) -> Result<Vec<Candidate>, OrchestratorError> {
        let env = &self.env;
        let cfg = &self.cfg;
        let init = self.state.policy.as_ref();
        let train_seed = derive_path(cfg.seed, &[STREAM_TRAIN, subtask as u64]);
        let train_cfg = crate::trainer::TrainConfig {
            iterations,
            seed: train_seed,
            ..cfg.train.clone()
        };
        let results = map_indexed(cfg.train.exec, slots.len(), |slot| -> Result<Candidate, TrainError> {
            let s = &slots[slot];
            let mut status = CandidateStatus {
                candidate: slot,
                state: CandidateState::InvalidCode,
                attempts: s.attempts,
                error: None,
                init: init.map(|c| c.provenance),
                env_steps: 0,
                best_fitness: None,
                target: None,
            };
            let failed = |status: CandidateStatus| Candidate {
                status,
                checkpoint: None,
                curve_csv: None,
                summary: None,
            };
            let (reward, program, spec) = if sparse {
                (RewardSource::SuccessIndicator, None, env.target_goal_spec.clone())
            } else {
                match &s.code {
                    Ok(code) => (
                        RewardSource::Program(code.program.clone()),
                        Some(&code.program),
                        code.goal_spec.clone(),
                    ),
                    Err(e) => {
                        status.error = Some(e.clone());
                        return Ok(failed(status));
                    }
                }
            };
            let outcome = match train(init, env, &reward, &spec, &train_cfg) {
                Ok(o) => o,
                Err(TrainError::TaskCodeRuntimeFault(f)) => {
                    status.state = CandidateState::TrainingFault;
                    status.error = Some(f.to_string());
                    return Ok(failed(status));
                }
                Err(e) => return Err(e),
            };
            let mut checkpoint = outcome.checkpoint.clone();
            checkpoint.provenance = Provenance {
                subtask,
                candidate: slot,
                seed: train_seed,
            };
            status.env_steps = outcome.env_steps;
            status.best_fitness = outcome.best_fitness.is_finite().then_some(outcome.best_fitness);
            let policy = checkpoint.policy();
            let summary_seed = derive_path(cfg.seed, &[STREAM_SUMMARY, subtask as u64]);
            let batch = rollout(&policy, env, &spec, program, cfg.eval_episodes, summary_seed, cfg.train.gamma)?;
            let summary = summarize(&batch, env, slot).expect("eval_episodes is positive");
            let target_seed = derive_path(cfg.seed, &[STREAM_CANDIDATE_TARGET, subtask as u64]);
            status.target = Some(evaluate_target(&policy, env, cfg.eval_episodes, target_seed, cfg.train.gamma));
            if summary.fault_count > 0 {
                status.state = CandidateState::EvaluationFault;
                status.error = Some(format!("{} evaluation episodes faulted", summary.fault_count));
            } else {
                status.state = CandidateState::Trained;
            }
            Ok(Candidate {
                status,
                curve_csv: Some(outcome.curve_csv()),
                checkpoint: Some(checkpoint),
                summary: Some(summary),
            })
        });
        results.into_iter().collect::<Result<Vec<_>, _>>().map_err(Into::into)
    }

    fn persist_candidate(&self, subtask: usize, slot: &Slot, c: &Candidate) -> Result<(), OrchestratorError> {
        let dir = candidate_dir(self.root, subtask, c.status.candidate);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        if let Some(raw) = &slot.raw {
            write_text(&dir.join("task_code.txt"), raw)?;
        }
        write_json(&dir.join("status.json"), &c.status)?;
        if let Some(ck) = &c.checkpoint {
            write_json(&dir.join("checkpoint.json"), ck)?;
        }
        if let Some(s) = &c.summary {
            write_json(&dir.join("summary.json"), s)?;
        }
        if let Some(csv) = &c.curve_csv {
            write_text(&dir.join("fitness_curve.csv"), csv)?;
        }
        Ok(())
    }

    /// Samples, trains and selects for one subtask, then commits it.
    fn run_subtask(&mut self, subtask: usize, task: &TaskSpec) -> Result<(), OrchestratorError> {
        let mode = self.cfg.mode;
        let sparse = mode == RunMode::Sparse;
        self.log.line(&format!("subtask {subtask}: {}", task.name));
        let slots = if sparse {
            vec![Slot {
                raw: None,
                code: Err("sparse".into()),
                attempts: 0,
            }]
        } else {
            self.sample_codes(subtask, task)?
        };
        let iterations = match mode {
            RunMode::Curriculum => self.cfg.train.iterations,
            RunMode::Zeroshot | RunMode::Sparse => self.cfg.train.iterations * self.cfg.budget_subtasks,
        };
        let candidates = self.train_slots(subtask, &slots, sparse, iterations)?;
        let mut env_steps = 0;
        for (slot, c) in slots.iter().zip(&candidates) {
            self.persist_candidate(subtask, slot, c)?;
            env_steps += c.status.env_steps;
            self.log.line(&format!(
                "subtask {subtask} candidate {}: {:?}{}",
                c.status.candidate,
                c.status.state,
                c.status.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
            ));
        }
        let survivors: Vec<&Candidate> = candidates
            .iter()
            .filter(|c| c.status.state == CandidateState::Trained)
            .collect();
        if survivors.is_empty() {
            return Err(OrchestratorError::AllCandidatesFailed(subtask));
        }
        let summaries: Vec<TrajectorySummary> = survivors.iter().map(|c| c.summary.clone().expect("trained")).collect();
        let target_success: Vec<f64> = survivors
            .iter()
            .map(|c| c.status.target.map_or(0.0, |t| t.success_rate))
            .collect();

        let dir = subtask_dir(self.root, subtask);
        let selection = if mode == RunMode::Curriculum {
            let history = self.history_items();
            let sel = select_best(
                self.gateway()?,
                &self.env,
                task,
                &history,
                &summaries,
                &target_success,
                subtask,
                self.cfg.retries,
                &self.settings,
            );
            if let Some(p) = &sel.prompt {
                write_text(&dir.join("evaluation_prompt.txt"), p)?;
            }
            write_text(&dir.join("evaluation_response.txt"), &join_attempts(&sel.responses))?;
            sel
        } else {
            let pos = best_by_target(&target_success);
            Selection {
                candidate: summaries[pos].candidate_index,
                method: SelectionMethod::TargetSuccessRate,
                reason: "highest target success rate, lowest index on ties".into(),
                agent_map: summaries.iter().map(|s| s.candidate_index).collect(),
                prompt: None,
                responses: Vec::new(),
            }
        };
        write_json(&dir.join("selected.json"), &selection)?;
        let chosen = &candidates[selection.candidate];
        debug_assert_eq!(chosen.status.state, CandidateState::Trained);
        self.log.line(&format!(
            "subtask {subtask}: selected candidate {} ({:?})",
            selection.candidate, selection.method
        ));

        let checkpoint = chosen.checkpoint.clone().expect("trained");
        let metrics = evaluate_target(
            &checkpoint.policy(),
            &self.env,
            self.cfg.target_episodes,
            derive_seed(self.cfg.seed, STREAM_TARGET),
            self.cfg.train.gamma,
        );
        if let Ok(code) = &slots[selection.candidate].code {
            self.state.history.push(HistoryEntry {
                task: task.clone(),
                selected_code: code.canonical_source(),
                selected_summary: chosen.summary.clone().expect("trained"),
                selected_candidate: selection.candidate,
            });
        }
        self.state.target_metrics.push(TargetRow {
            subtask,
            task: task.name.clone(),
            selected_candidate: selection.candidate,
            metrics,
            env_steps,
        });
        self.state.total_env_steps += env_steps;
        self.state.policy = Some(checkpoint);
        self.log.line(&format!(
            "subtask {subtask}: target success rate {:.3}, {env_steps} env steps",
            metrics.success_rate
        ));
        self.commit()
    }

    fn drive(mut self, opts: &RunOptions) -> Result<RunState, OrchestratorError> {
        if self.state.complete {
            return Ok(self.finish());
        }
        let tasks: Vec<TaskSpec> = match self.cfg.mode {
            RunMode::Curriculum => {
                if self.state.curriculum.is_none() {
                    let c = self.query_curriculum()?;
                    write_json(&self.root.join(CURRICULUM), &c)?;
                    self.state.curriculum = Some(c);
                    self.commit()?;
                }
                self.state.curriculum.as_ref().expect("set above").tasks.clone()
            }
            RunMode::Zeroshot => {
                if self.state.curriculum.is_none() {
                    let c = Curriculum {
                        tasks: vec![target_task(&self.env)],
                    };
                    write_json(&self.root.join(CURRICULUM), &c)?;
                    self.state.curriculum = Some(c);
                    self.commit()?;
                }
                self.state.curriculum.as_ref().expect("set above").tasks.clone()
            }
            RunMode::Sparse => vec![target_task(&self.env)],
        };
        for n in self.state.completed_subtasks() + 1..=tasks.len() {
            self.run_subtask(n, &tasks[n - 1])?;
            if opts.stop_after_subtask == Some(n) && n < tasks.len() {
                self.log.line(&format!("stopping after subtask {n}"));
                return Ok(self.finish());
            }
        }
        self.state.complete = true;
        self.commit()?;
        self.log.line(&format!("run complete, {} env steps", self.state.total_env_steps));
        Ok(self.finish())
    }

    fn finish(mut self) -> RunState {
        self.state.backend_calls = self.gateway.map_or(0, Gateway::calls);
        self.state
    }
}

fn settings_for(cfg: &RunConfig) -> PromptSettings {
    let mut s = cfg.prompts.clone();
    if let Ok(spec) = parse_backend_spec(&cfg.backend) {
        if !spec.is_offline() {
            s.model = spec.model().to_string();
        }
    }
    s
}

fn connect(cfg: &RunConfig) -> Result<Option<Gateway>, OrchestratorError> {
    if cfg.mode == RunMode::Sparse {
        return Ok(None);
    }
    let spec = parse_backend_spec(&cfg.backend).map_err(|e| OrchestratorError::Config(e.to_string()))?;
    let backend = spec.connect().map_err(OrchestratorError::BackendSetup)?;
    Ok(Some(Gateway::new(backend)))
}

/// Starts a run in an empty or absent directory, connecting the configured backend.
pub fn run(cfg: &RunConfig, run_dir: &Path, opts: &RunOptions) -> Result<RunState, OrchestratorError> {
    cfg.validate()?;
    let gateway = connect(cfg)?;
    run_with_gateway(cfg, run_dir, gateway.as_ref(), opts)
}

/// Like [`run`] with a caller-supplied gateway; `cfg.backend` is only recorded.
pub fn run_with_gateway(
    cfg: &RunConfig,
    run_dir: &Path,
    gateway: Option<&Gateway>,
    opts: &RunOptions,
) -> Result<RunState, OrchestratorError> {
    cfg.validate()?;
    if !is_empty_dir(run_dir)? {
        return Err(OrchestratorError::RunDirectoryNotEmpty(run_dir.to_path_buf()));
    }
    fs::create_dir_all(run_dir).map_err(io_err(run_dir))?;
    let _lock = RunLock::acquire(run_dir)?;
    let mut log = RunLog::open(run_dir)?;
    log.line(&format!("starting {:?} run on {} with seed {}", cfg.mode, cfg.env_id, cfg.seed));
    write_json(&run_dir.join(CONFIG), cfg)?;
    let manifest = Manifest::new(cfg.mode, &cfg.env_id);
    write_json(&run_dir.join(MANIFEST), &manifest)?;
    let pipeline = Pipeline {
        env: builtin(&cfg.env_id)?,
        settings: settings_for(cfg),
        cfg: cfg.clone(),
        root: run_dir,
        gateway,
        log,
        manifest,
        state: RunState {
            config: cfg.clone(),
            curriculum: None,
            history: Vec::new(),
            policy: None,
            target_metrics: Vec::new(),
            total_env_steps: 0,
            complete: false,
            backend_calls: 0,
        },
    };
    pipeline.drive(opts)
}

fn load_config(run_dir: &Path, given: Option<&RunConfig>) -> Result<RunConfig, OrchestratorError> {
    if is_empty_dir(run_dir)? {
        return Err(OrchestratorError::CorruptRunDirectory(format!(
            "{} holds no run",
            run_dir.display()
        )));
    }
    let stored: RunConfig = read_json(&run_dir.join(CONFIG))?;
    if let Some(g) = given {
        if let Some(diff) = stored.mismatch(g) {
            return Err(OrchestratorError::ConfigMismatch(diff));
        }
    }
    Ok(stored)
}

/// Continues a run after its last committed subtask. `given` is checked against the
/// stored config; `backend` replaces the stored backend for this session.
pub fn resume(
    run_dir: &Path,
    given: Option<&RunConfig>,
    backend: Option<&str>,
    opts: &RunOptions,
) -> Result<RunState, OrchestratorError> {
    let mut cfg = load_config(run_dir, given)?;
    if let Some(b) = backend {
        cfg.backend = b.to_string();
    }
    let gateway = connect(&cfg)?;
    resume_inner(run_dir, given, backend, gateway.as_ref(), opts)
}

/// Like [`resume`] with a caller-supplied gateway.
pub fn resume_with_gateway(
    run_dir: &Path,
    given: Option<&RunConfig>,
    gateway: Option<&Gateway>,
    opts: &RunOptions,
) -> Result<RunState, OrchestratorError> {
    resume_inner(run_dir, given, None, gateway, opts)
}

fn resume_inner(
    run_dir: &Path,
    given: Option<&RunConfig>,
    backend: Option<&str>,
    gateway: Option<&Gateway>,
    opts: &RunOptions,
) -> Result<RunState, OrchestratorError> {
    let mut cfg = load_config(run_dir, given)?;
    let mut settings_cfg = cfg.clone();
    if let Some(b) = backend {
        settings_cfg.backend = b.to_string();
    }
    if let Some(g) = given {
        cfg.train.exec = g.train.exec;
    }
    let corrupt = |m: String| OrchestratorError::CorruptRunDirectory(m);
    let manifest: Manifest = read_json(&run_dir.join(MANIFEST))?;
    if manifest.mode != cfg.mode || manifest.env_id != cfg.env_id {
        return Err(corrupt("manifest disagrees with config.json".into()));
    }
    let env = builtin(&cfg.env_id)?;
    let _lock = RunLock::acquire(run_dir)?;
    let mut log = RunLog::open(run_dir)?;

    let curriculum_path = run_dir.join(CURRICULUM);
    let curriculum: Option<Curriculum> = if curriculum_path.exists() && manifest.curriculum_length.is_some() {
        Some(read_json(&curriculum_path)?)
    } else {
        None
    };
    if curriculum.as_ref().map(Curriculum::len) != manifest.curriculum_length {
        return Err(corrupt("curriculum.json does not match the manifest".into()));
    }
    let done = manifest.completed_subtasks;
    if manifest.target_metrics.len() != done {
        return Err(corrupt("manifest metrics do not match its completed count".into()));
    }
    let history: Vec<HistoryEntry> = if cfg.mode == RunMode::Sparse || done == 0 {
        Vec::new()
    } else {
        read_json(&run_dir.join(HISTORY))?
    };
    if cfg.mode != RunMode::Sparse && history.len() != done {
        return Err(corrupt(format!("history has {} entries, manifest says {done}", history.len())));
    }
    let policy = if done == 0 {
        None
    } else {
        let sel: Selection = read_json(&subtask_dir(run_dir, done).join("selected.json"))?;
        let ck: PolicyCheckpoint = read_json(&candidate_dir(run_dir, done, sel.candidate).join("checkpoint.json"))?;
        ck.check(&env).map_err(|e| corrupt(e.to_string()))?;
        Some(ck)
    };
    // drop half-finished work beyond the last commit
    for n in done + 1..=crate::llm::MAX_TASKS.max(1) {
        let d = subtask_dir(run_dir, n);
        if d.exists() {
            fs::remove_dir_all(&d).map_err(io_err(&d))?;
        }
    }
    if manifest.curriculum_length.is_none() {
        for f in ["curriculum_prompt.txt", "curriculum_response.txt", CURRICULUM] {
            let _ = fs::remove_file(run_dir.join(f));
        }
    }
    log.line(&format!("resuming after subtask {done}"));
    let state = RunState {
        config: cfg.clone(),
        curriculum,
        history,
        policy,
        target_metrics: manifest.target_metrics.clone(),
        total_env_steps: manifest.total_env_steps,
        complete: manifest.complete,
        backend_calls: 0,
    };
    let pipeline = Pipeline {
        env,
        settings: settings_for(&settings_cfg),
        cfg,
        root: run_dir,
        gateway,
        log,
        manifest,
        state,
    };
    pipeline.drive(opts)
}

/// The policy selected after the last completed subtask, with the run's config.
pub fn load_policy(run_dir: &Path) -> Result<(RunConfig, PolicyCheckpoint), OrchestratorError> {
    let cfg = load_config(run_dir, None)?;
    let manifest: Manifest = read_json(&run_dir.join(MANIFEST))?;
    let done = manifest.completed_subtasks;
    if done == 0 {
        return Err(OrchestratorError::CorruptRunDirectory("no subtask has completed yet".into()));
    }
    let sel: Selection = read_json(&subtask_dir(run_dir, done).join("selected.json"))?;
    let ck: PolicyCheckpoint = read_json(&candidate_dir(run_dir, done, sel.candidate).join("checkpoint.json"))?;
    ck.check(&builtin(&cfg.env_id)?)
        .map_err(|e| OrchestratorError::CorruptRunDirectory(e.to_string()))?;
    Ok((cfg, ck))
}

/// Re-evaluates the run's current policy on the target task with the seeds used for
/// the recorded metrics; `episodes` defaults to the config's `target_episodes`.
pub fn evaluate_run(run_dir: &Path, episodes: Option<usize>) -> Result<TargetMetrics, OrchestratorError> {
    let (cfg, ck) = load_policy(run_dir)?;
    let env = builtin(&cfg.env_id)?;
    Ok(evaluate_target(
        &ck.policy(),
        &env,
        episodes.unwrap_or(cfg.target_episodes),
        derive_seed(cfg.seed, STREAM_TARGET),
        cfg.train.gamma,
    ))
}
