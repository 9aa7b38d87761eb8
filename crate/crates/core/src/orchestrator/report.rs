use std::fmt::Write as _;
use std::path::Path;

use super::pipeline::Selection;
use super::store::{candidate_dir, read_json, subtask_dir, Manifest, MANIFEST};
use super::{OrchestratorError, RunMode};
use crate::stats::TrajectorySummary;
use crate::trainer::CurveRow;

/// Plot-ready text derived from a run directory. Needs no backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    /// Per-subtask table followed by the final target row.
    pub table: String,
    /// Every candidate's fitness curve, tagged with subtask and candidate.
    pub curves_csv: String,
}

pub fn report(run_dir: &Path) -> Result<Report, OrchestratorError> {
    let manifest: Manifest = read_json(&run_dir.join(MANIFEST))?;
    let total = match manifest.mode {
        RunMode::Curriculum => manifest.curriculum_length,
        RunMode::Zeroshot | RunMode::Sparse => Some(1),
    };
    let status = if manifest.complete { "complete" } else { "partial" };
    let mut table = String::new();
    let _ = writeln!(table, "env: {}  mode: {:?}", manifest.env_id, manifest.mode);
    let _ = writeln!(
        table,
        "status: {status} ({} of {} subtasks)",
        manifest.completed_subtasks,
        total.map_or("?".to_string(), |t| t.to_string())
    );
    let _ = writeln!(table);
    let _ = writeln!(
        table,
        "{:>7}  {:>8}  {:>12}  {:>14}  {:>10}  task",
        "subtask", "selected", "success_rate", "episode_length", "env_steps"
    );

    let mut curves = format!("subtask,candidate,{}\n", CurveRow::CSV_HEADER);
    for row in &manifest.target_metrics {
        let n = row.subtask;
        let sel: Selection = read_json(&subtask_dir(run_dir, n).join("selected.json"))?;
        let summary: TrajectorySummary =
            read_json(&candidate_dir(run_dir, n, sel.candidate).join("summary.json"))?;
        let _ = writeln!(
            table,
            "{:>7}  {:>8}  {:>12.3}  {:>14.3}  {:>10}  {}",
            n, sel.candidate, row.metrics.success_rate, summary.episode_length_mean, row.env_steps, row.task
        );
        for k in 0..super::MAX_CANDIDATES {
            let path = candidate_dir(run_dir, n, k).join("fitness_curve.csv");
            let Ok(text) = std::fs::read_to_string(&path) else { continue };
            for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
                let _ = writeln!(curves, "{n},{k},{line}");
            }
        }
    }
    if let Some(last) = manifest.target_metrics.last() {
        let _ = writeln!(
            table,
            "{:>7}  {:>8}  {:>12.3}  {:>14.3}  {:>10}  {}",
            "target",
            last.selected_candidate,
            last.metrics.success_rate,
            last.metrics.mean_episode_length,
            manifest.total_env_steps,
            if manifest.complete { "final" } else { "partial" }
        );
    }
    Ok(Report {
        table,
        curves_csv: curves,
    })
}
