//! Rollout statistics and their text rendering for the evaluation prompt.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvironmentDefinition;
use crate::trainer::TrajectoryBatch;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("cannot summarize an empty batch")]
    EmptyBatch,
    #[error("rendered summary is malformed at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Component-wise statistics of one state variable over all steps of the non-faulted episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub name: String,
    #[serde(with = "nan_as_null")]
    pub mean: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub std: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub min: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub candidate_index: usize,
    pub variables: Vec<VariableStats>,
    pub episode_length_mean: f64,
    pub success_rate: f64,
    pub fault_count: usize,
    pub episode_count: usize,
}

impl TrajectorySummary {
    pub fn mean_of(&self, name: &str) -> Option<&[f64]> {
        self.variables.iter().find(|v| v.name == name).map(|v| v.mean.as_slice())
    }
}

/// Summarizes a batch. Variable statistics use every transition of the episodes
/// that did not fault; length and success use all episodes.
pub fn summarize(
    batch: &TrajectoryBatch,
    env: &EnvironmentDefinition,
    candidate_index: usize,
) -> Result<TrajectorySummary, StatsError> {
    if batch.episodes.is_empty() {
        return Err(StatsError::EmptyBatch);
    }
    let dims = env.observation_dims();
    let mut sum = vec![0.0; dims];
    let mut sum_sq = vec![0.0; dims];
    let mut min = vec![f64::INFINITY; dims];
    let mut max = vec![f64::NEG_INFINITY; dims];
    let mut count = 0usize;
    let mut faults = 0;
    for ep in &batch.episodes {
        if ep.faulted() {
            faults += 1;
            continue;
        }
        for t in &ep.transitions {
            for (k, &v) in t.next_observation.values.iter().enumerate() {
                sum[k] += v;
                sum_sq[k] += v * v;
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
            count += 1;
        }
    }
    let n = count as f64;
    let mut variables = Vec::with_capacity(env.variables.len());
    for (i, var) in env.variables.iter().enumerate() {
        let range = env.offset(i)..env.offset(i) + var.dims;
        let (mut mean, mut std, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for k in range {
            if count == 0 {
                mean.push(f64::NAN);
                std.push(f64::NAN);
                lo.push(f64::NAN);
                hi.push(f64::NAN);
                continue;
            }
            let m = sum[k] / n;
            mean.push(m);
            std.push((sum_sq[k] / n - m * m).max(0.0).sqrt());
            lo.push(min[k]);
            hi.push(max[k]);
        }
        variables.push(VariableStats {
            name: var.name.clone(),
            mean,
            std,
            min: lo,
            max: hi,
        });
    }
    let episodes = batch.episodes.len() as f64;
    Ok(TrajectorySummary {
        candidate_index,
        variables,
        episode_length_mean: batch.total_steps() as f64 / episodes,
        success_rate: batch.episodes.iter().filter(|e| e.success).count() as f64 / episodes,
        fault_count: faults,
        episode_count: batch.episodes.len(),
    })
}

/// Three-decimal rendering, rounding half away from zero; `-0.000` prints as `0.000`.
pub fn format_value(v: f64) -> String {
    if !v.is_finite() {
        return "nan".to_string();
    }
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        "0.000".to_string()
    } else {
        format!("{r:.3}")
    }
}

fn format_vector(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format_value(*v)).collect();
    format!("[{}]", parts.join(" "))
}

/// One `Agent k:` block per summary, numbered by position in `summaries`.
pub fn render_summaries(summaries: &[TrajectorySummary]) -> String {
    let blocks: Vec<String> = summaries
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut lines = vec![format!("Agent {k}:")];
            for v in &s.variables {
                lines.push(format!("{}: {}", v.name, format_vector(&v.mean)));
            }
            lines.push(format!("episode_length: {}", format_value(s.episode_length_mean)));
            lines.push(format!("success_rate: {}", format_value(s.success_rate)));
            lines.join("\n")
        })
        .collect();
    blocks.join("\n\n")
}

/// A rendered agent block read back into numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedBlock {
    pub agent: usize,
    pub variables: Vec<(String, Vec<f64>)>,
    pub episode_length: f64,
    pub success_rate: f64,
}

/// Inverse of [`render_summaries`] up to the 3-decimal quantization.
pub fn parse_rendered(text: &str) -> Result<Vec<RenderedBlock>, StatsError> {
    let mut blocks: Vec<RenderedBlock> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let malformed = |message: &str| StatsError::Malformed {
            line: i + 1,
            message: message.to_string(),
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("Agent ") {
            let agent = rest
                .strip_suffix(':')
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| malformed("bad agent header"))?;
            blocks.push(RenderedBlock {
                agent,
                variables: Vec::new(),
                episode_length: f64::NAN,
                success_rate: f64::NAN,
            });
            continue;
        }
        let block = blocks.last_mut().ok_or_else(|| malformed("value before any agent header"))?;
        let (name, value) = line.split_once(": ").ok_or_else(|| malformed("expected `name: value`"))?;
        let number = |s: &str| -> Result<f64, StatsError> {
            if s == "nan" {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|_| malformed("bad number"))
            }
        };
        match name {
            "episode_length" => block.episode_length = number(value)?,
            "success_rate" => block.success_rate = number(value)?,
            _ => {
                let inner = value
                    .strip_prefix('[')
                    .and_then(|v| v.strip_suffix(']'))
                    .ok_or_else(|| malformed("expected a bracketed vector"))?;
                let values = inner.split_whitespace().map(number).collect::<Result<Vec<_>, _>>()?;
                block.variables.push((name.to_string(), values));
            }
        }
    }
    Ok(blocks)
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opts: Vec<Option<f64>> = values.iter().map(|v| v.is_finite().then_some(*v)).collect();
        opts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opts: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(opts.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }
}
