//! Reward-expression language for task code.
//!
//! A model response carries a ```` ```reward ```` fence holding a small program
//! over the environment's normalized state variables, and a ```` ```goal ````
//! fence holding one `NAME: [lo, hi]` line per goal dimension. Programs are
//! parsed, grounded against an environment registry, then compiled to a flat
//! stack program for evaluation.

mod ast;
mod eval;
mod lexer;
mod parser;
mod print;
mod task_code;
mod typecheck;

use thiserror::Error;

pub use ast::{BinOp, Expr, Func, RewardProgram};
pub use eval::{RewardFault, Scratch, DIVISION_GUARD};
pub use parser::parse_program;
pub use print::{format_expr, format_number, pretty_print};
pub use task_code::{
    extract_fence, parse_goal_lines, parse_task_code, validate_goal_spec, GoalLine, ParsedTaskCode, TaskCode,
    GOAL_FENCE, REWARD_FENCE,
};
pub use typecheck::{typecheck, RefKind, ResolvedRef, TypedProgram, ACTION};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("missing ```{0} fence")]
    MissingFence(&'static str),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("reward program is empty")]
    EmptyProgram,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("index {index} out of range for `{name}` with {dims} components")]
    BadIndex { name: String, index: usize, dims: usize },
    #[error("reduction applied to `{0}`, which is not a vector variable")]
    BadReduction(String),
    #[error("`{0}` is a scalar and cannot be indexed")]
    ScalarIndexed(String),
    #[error("vector variable `{0}` used as a scalar; index it or reduce it")]
    UnreducedVector(String),
    #[error("binding `{0}` shadows an environment variable")]
    ShadowedVariable(String),
    #[error("unknown goal dimension `{0}`")]
    UnknownDimension(String),
    #[error("goal dimension `{0}` given twice")]
    DuplicateDimension(String),
    #[error("goal range for `{name}` is inverted: [{lo}, {hi}]")]
    InvertedRange { name: String, lo: f64, hi: f64 },
    #[error("goal range for `{name}` [{lo}, {hi}] exceeds allowed [{min}, {max}]")]
    RangeOutOfBounds { name: String, lo: f64, hi: f64, min: f64, max: f64 },
    #[error("goal range for `{name}` [{lo}, {hi}] admits no goal")]
    EmptyGoalRegion { name: String, lo: f64, hi: f64 },
}

impl DslError {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        DslError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn on_line(self, line: usize) -> Self {
        match self {
            DslError::Syntax { column, message, .. } => DslError::Syntax { line, column, message },
            other => other,
        }
    }
}

/// Grammar reference shown to the language model in task-code prompts.
pub const GRAMMAR_CARD: &str = "\
Reward programs are written in a small expression language, not Python.
A program is zero or more assignments followed by one return line:

    name = expression
    ...
    return expression

Expressions use numbers (1, 0.5, 2e-3), + - * / with the usual precedence, unary minus,
parentheses, and the names below. `#` starts a comment.
- A scalar variable is used by name: dist_to_goal
- A vector variable must be indexed (agent_pos[0]) or reduced (norm(agent_vel))
- `action` is the action vector that was applied
- Functions: abs(x), sq(x), sqrt(x) (negative inputs count as 0), exp(x), tanh(x),
  min(a, b), max(a, b), clip(x, lo, hi),
  and reductions over a whole vector variable: norm(v), sum(v), sum_sq(v), mean(v)
- Assigned names may be used in later lines; they cannot reuse a variable name.
- Dividing by a value smaller than 1e-9 in magnitude is an error.
All variables are normalized to [-1, 1] and describe the state after the action was applied.";
