use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::RewardProgram;
use super::lexer::{tokenize, Tok};
use super::typecheck::{typecheck, TypedProgram};
use super::{parse_program, DslError};
use crate::env::{EnvError, EnvironmentDefinition, GoalSpec};

pub const REWARD_FENCE: &str = "reward";
pub const GOAL_FENCE: &str = "goal";

/// One `NAME: [lo, hi]` line of a goal fence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalLine {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub line: usize,
}

/// Result of extracting and parsing both fences of a response.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTaskCode {
    pub program: RewardProgram,
    pub goal_lines: Vec<GoalLine>,
}

/// An executable task: a grounded reward program plus the goal distribution it trains on.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskCode {
    pub program: TypedProgram,
    pub goal_spec: GoalSpec,
    pub raw: String,
}

impl TaskCode {
    /// Parses, typechecks and validates a full model response for `env`.
    pub fn from_response(text: &str, env: &EnvironmentDefinition) -> Result<TaskCode, DslError> {
        let parsed = parse_task_code(text)?;
        let program = typecheck(&parsed.program, env)?;
        let goal_spec = validate_goal_spec(&parsed.goal_lines, env)?;
        Ok(TaskCode {
            program,
            goal_spec,
            raw: text.to_string(),
        })
    }

    /// The canonical task code as it is shown back to the model in later prompts.
    pub fn canonical_source(&self) -> String {
        format!(
            "```{REWARD_FENCE}\n{}\n```\n```{GOAL_FENCE}\n{}```",
            super::pretty_print(&self.program.program),
            self.goal_spec.to_lines()
        )
    }
}

/// Body of the first fenced block tagged `tag` (case-insensitive), or `None`.
pub fn extract_fence<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let mut offset = 0;
    let mut body_start: Option<usize> = None;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        match body_start {
            None => {
                if let Some(rest) = trimmed.strip_prefix("```") {
                    if rest.trim().eq_ignore_ascii_case(tag) {
                        body_start = Some(offset + line.len());
                    }
                }
            }
            Some(start) => {
                if trimmed.starts_with("```") {
                    return Some(&text[start..offset]);
                }
            }
        }
        offset += line.len();
    }
    // an unterminated fence runs to the end of the text
    body_start.map(|start| &text[start.min(text.len())..])
}

/// Extracts the first `reward` and `goal` fences and parses both.
pub fn parse_task_code(text: &str) -> Result<ParsedTaskCode, DslError> {
    let reward = extract_fence(text, REWARD_FENCE).ok_or(DslError::MissingFence(REWARD_FENCE))?;
    let goal = extract_fence(text, GOAL_FENCE).ok_or(DslError::MissingFence(GOAL_FENCE))?;
    let program = parse_program(reward)?;
    let goal_lines = parse_goal_lines(goal)?;
    Ok(ParsedTaskCode { program, goal_lines })
}

/// Parses `NAME: [lo, hi]` lines; blank lines and `#` comments are skipped.
pub fn parse_goal_lines(text: &str) -> Result<Vec<GoalLine>, DslError> {
    let mut out = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let tokens = tokenize(raw_line).map_err(|e| e.on_line(line_no))?;
        let toks: Vec<&Tok> = tokens.iter().map(|t| &t.tok).collect();
        if toks.len() == 1 {
            continue;
        }
        let err = |msg: &str| {
            let col = tokens.first().map(|t| t.column).unwrap_or(1);
            DslError::syntax(line_no, col, format!("goal line must look like `name: [lo, hi]`: {msg}"))
        };
        let mut k = 0;
        let name = match toks.get(k) {
            Some(Tok::Ident(n)) => n.clone(),
            _ => return Err(err("missing dimension name")),
        };
        k += 1;
        for want in [Tok::Colon, Tok::LBracket] {
            if toks.get(k) != Some(&&want) {
                return Err(err(&format!("expected {}", want.describe())));
            }
            k += 1;
        }
        let number = |k: &mut usize| -> Result<f64, DslError> {
            let neg = toks.get(*k) == Some(&&Tok::Minus);
            if neg {
                *k += 1;
            }
            match toks.get(*k) {
                Some(Tok::Number(v, _)) => {
                    *k += 1;
                    Ok(if neg { -v } else { *v })
                }
                _ => Err(err("expected a number")),
            }
        };
        let lo = number(&mut k)?;
        if toks.get(k) != Some(&&Tok::Comma) {
            return Err(err("expected `,`"));
        }
        k += 1;
        let hi = number(&mut k)?;
        if toks.get(k) != Some(&&Tok::RBracket) || toks.get(k + 1) != Some(&&Tok::Eof) {
            return Err(err("expected `]` at end of line"));
        }
        out.push(GoalLine {
            name,
            lo,
            hi,
            line: line_no,
        });
    }
    Ok(out)
}

/// Validates goal lines against the environment's goal dimensions. Dimensions the
/// lines omit take the environment's target range.
pub fn validate_goal_spec(lines: &[GoalLine], env: &EnvironmentDefinition) -> Result<GoalSpec, DslError> {
    let mut ranges = BTreeMap::new();
    for l in lines {
        if ranges.insert(l.name.clone(), (l.lo, l.hi)).is_some() {
            return Err(DslError::DuplicateDimension(l.name.clone()));
        }
    }
    for dim in &env.goal_dims {
        if !ranges.contains_key(&dim.name) {
            if let Some(r) = env.target_goal_spec.get(&dim.name) {
                ranges.insert(dim.name.clone(), r);
            }
        }
    }
    let spec = GoalSpec { ranges };
    env.validate_goal_spec(&spec).map_err(|e| match e {
        EnvError::UnknownDimension(n) => DslError::UnknownDimension(n),
        EnvError::InvertedRange { name, lo, hi } => DslError::InvertedRange { name, lo, hi },
        EnvError::RangeOutOfBounds { name, lo, hi, min, max } => DslError::RangeOutOfBounds { name, lo, hi, min, max },
        EnvError::EmptyGoalRegion { name, lo, hi } => DslError::EmptyGoalRegion { name, lo, hi },
        other => DslError::UnknownDimension(other.to_string()),
    })?;
    Ok(spec)
}
