mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use curriculum_core::dsl::{parse_program, pretty_print, typecheck, DslError, TaskCode};
use curriculum_core::env::builtin;
use curriculum_core::orchestrator::{self, OrchestratorError, RunMode, RunOptions};

use config::ConfigProblem;

#[derive(Parser)]
#[command(name = "curriculum", version, about = "Language-model task curricula for point-mass environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run config; every field has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory (must be empty or absent).
    #[arg(long)]
    out: PathBuf,
    /// live:<url>,<model> | scripted:<fixture-path> | replay:<dir>
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a config key, e.g. --set train.iterations=10
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Stop after this subtask is persisted; continue later with `resume`.
    #[arg(long, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Full curriculum run.
    Run(RunArgs),
    /// Task code for the target task only, with the matched training budget.
    Zeroshot(RunArgs),
    /// Success-indicator reward, no language model.
    Sparse(RunArgs),
    /// Continue an interrupted run.
    Resume {
        #[arg(long)]
        out: PathBuf,
        /// Checked against the stored config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Re-evaluate a run's current policy on the target task.
    Eval {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Write report.txt and curves.csv for a run.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Where to write the files (defaults to the run directory).
        #[arg(long)]
        dest: Option<PathBuf>,
    },
    /// Parse and typecheck a reward program or a full task-code response.
    ValidateDsl {
        file: PathBuf,
        #[arg(long, default_value = "point_maze")]
        env: String,
    },
    /// Print an environment's description and variable registry.
    DumpEnv {
        #[arg(default_value = "point_maze")]
        env: String,
    },
}

/// Marks failures of the input being checked (exit status 4).
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigProblem>().is_some() {
        return 2;
    }
    match err.downcast_ref::<OrchestratorError>() {
        Some(OrchestratorError::Config(_) | OrchestratorError::ConfigMismatch(_)) => 2,
        Some(OrchestratorError::Backend { .. } | OrchestratorError::BackendSetup(_)) => 3,
        _ => 4,
    }
}

fn start(mode: RunMode, args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = config::load(args.config.as_deref(), &args.overrides)?;
    cfg.mode = mode;
    if let Some(b) = args.backend {
        cfg.backend = b;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let opts = RunOptions {
        stop_after_subtask: args.stop_after,
    };
    let state = orchestrator::run(&cfg, &args.out, &opts)?;
    print_state(&state, &args.out);
    Ok(())
}

fn print_state(state: &orchestrator::RunState, dir: &Path) {
    let status = if state.complete { "complete" } else { "partial" };
    println!(
        "{status} run in {}: {} subtasks, {} env steps",
        dir.display(),
        state.completed_subtasks(),
        state.total_env_steps
    );
    if let Some(m) = state.final_metrics() {
        println!(
            "target success_rate {:.3}, mean episode length {:.1}",
            m.success_rate, m.mean_episode_length
        );
    }
}

fn validate_dsl(file: &Path, env_id: &str) -> anyhow::Result<()> {
    let env = builtin(env_id).map_err(|e| ConfigProblem(e.to_string()))?;
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let report = |e: DslError| anyhow!(Invalid(format!("{}: {e}", file.display())));
    if text.contains("```") {
        let code = TaskCode::from_response(&text, &env).map_err(report)?;
        println!("{}", code.canonical_source());
    } else {
        let program = parse_program(&text).map_err(report)?;
        let typed = typecheck(&program, &env).map_err(report)?;
        println!("{}", pretty_print(&typed.program));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(a) => start(RunMode::Curriculum, a),
        Command::Zeroshot(a) => start(RunMode::Zeroshot, a),
        Command::Sparse(a) => start(RunMode::Sparse, a),
        Command::Resume {
            out,
            config: cfg_path,
            backend,
            overrides,
        } => {
            let given = if cfg_path.is_none() && overrides.is_empty() {
                None
            } else {
                let stored_path = out.join("config.json");
                let stored = std::fs::read_to_string(&stored_path)
                    .ok()
                    .and_then(|t| serde_json::from_str(&t).ok())
                    .ok_or_else(|| OrchestratorError::CorruptRunDirectory(format!("{} unreadable", stored_path.display())))?;
                Some(config::load_onto(&stored, cfg_path.as_deref(), &overrides)?)
            };
            let state = orchestrator::resume(&out, given.as_ref(), backend.as_deref(), &RunOptions::default())?;
            print_state(&state, &out);
            Ok(())
        }
        Command::Eval { out, episodes } => {
            let m = orchestrator::evaluate_run(&out, episodes)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
            Ok(())
        }
        Command::Report { out, dest } => {
            let r = orchestrator::report(&out)?;
            let dest = dest.unwrap_or_else(|| out.clone());
            std::fs::create_dir_all(&dest).with_context(|| format!("creating {}", dest.display()))?;
            std::fs::write(dest.join("report.txt"), &r.table)?;
            std::fs::write(dest.join("curves.csv"), &r.curves_csv)?;
            print!("{}", r.table);
            Ok(())
        }
        Command::ValidateDsl { file, env } => validate_dsl(&file, &env),
        Command::DumpEnv { env } => {
            let env = builtin(&env).map_err(|e| ConfigProblem(e.to_string()))?;
            println!("{}", env.describe());
            println!("observation dims: {}", env.observation_dims());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
