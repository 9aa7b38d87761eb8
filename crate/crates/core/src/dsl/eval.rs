use thiserror::Error;

use super::ast::{BinOp, Func};
use super::typecheck::{Op, Source, TypedProgram};
use crate::env::Transition;

/// Denominators smaller than this in magnitude fault the evaluation.
pub const DIVISION_GUARD: f64 = 1e-9;

/// Runtime faults of task code. Both mark the candidate as faulty rather than crashing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RewardFault {
    #[error("division by a value smaller than 1e-9 in magnitude")]
    DivisionByNearZero,
    #[error("reward evaluated to a non-finite value")]
    NonFiniteResult,
}

/// Reusable evaluation buffers so the hot loop does not allocate.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    stack: Vec<f64>,
    slots: Vec<f64>,
}

#[inline]
pub(crate) fn apply_sqrt(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

#[inline]
pub(crate) fn apply_clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

pub(crate) fn reduce(func: Func, values: &[f64]) -> f64 {
    match func {
        Func::Norm => values.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Func::Sum => values.iter().sum(),
        Func::SumSq => values.iter().map(|v| v * v).sum(),
        Func::Mean => values.iter().sum::<f64>() / values.len() as f64,
        _ => unreachable!("not a reduction"),
    }
}

impl TypedProgram {
    pub fn scratch(&self) -> Scratch {
        Scratch {
            stack: Vec::with_capacity(self.max_stack),
            slots: vec![0.0; self.slots],
        }
    }

    /// Reward for a transition: variables bind to the next observation, `action` to the action taken.
    pub fn evaluate(&self, t: &Transition) -> Result<f64, RewardFault> {
        self.evaluate_raw(&t.next_observation.values, &t.action, &mut self.scratch())
    }

    /// Evaluates against a flat normalized observation and an action slice.
    pub fn evaluate_raw(&self, obs: &[f64], action: &[f64], scratch: &mut Scratch) -> Result<f64, RewardFault> {
        let stack = &mut scratch.stack;
        stack.clear();
        if scratch.slots.len() < self.slots {
            scratch.slots.resize(self.slots, 0.0);
        }
        for op in &self.code {
            match *op {
                Op::Const(v) => stack.push(v),
                Op::Obs(i) => stack.push(obs[i]),
                Op::Act(i) => stack.push(action[i]),
                Op::Load(s) => stack.push(scratch.slots[s]),
                Op::Store(s) => {
                    let v = pop(stack);
                    if !v.is_finite() {
                        return Err(RewardFault::NonFiniteResult);
                    }
                    scratch.slots[s] = v;
                }
                Op::Neg => {
                    let v = pop(stack);
                    stack.push(-v);
                }
                Op::Bin(op) => {
                    let rhs = pop(stack);
                    let lhs = pop(stack);
                    let v = match op {
                        BinOp::Add => lhs + rhs,
                        BinOp::Sub => lhs - rhs,
                        BinOp::Mul => lhs * rhs,
                        BinOp::Div => {
                            // NaN denominators fail the comparison and fall through to the finiteness check
                            if rhs.abs() < DIVISION_GUARD {
                                return Err(RewardFault::DivisionByNearZero);
                            }
                            lhs / rhs
                        }
                    };
                    stack.push(v);
                }
                Op::Abs => unary(stack, f64::abs),
                Op::Sq => unary(stack, |x| x * x),
                Op::Sqrt => unary(stack, apply_sqrt),
                Op::Exp => unary(stack, f64::exp),
                Op::Tanh => unary(stack, f64::tanh),
                Op::Min => {
                    let b = pop(stack);
                    let a = pop(stack);
                    stack.push(a.min(b));
                }
                Op::Max => {
                    let b = pop(stack);
                    let a = pop(stack);
                    stack.push(a.max(b));
                }
                Op::Clip => {
                    let hi = pop(stack);
                    let lo = pop(stack);
                    let x = pop(stack);
                    stack.push(apply_clip(x, lo, hi));
                }
                Op::Reduce(func, source, offset, len) => {
                    let values = match source {
                        Source::Obs => &obs[offset..offset + len],
                        Source::Act => &action[offset..offset + len],
                    };
                    stack.push(reduce(func, values));
                }
            }
        }
        let v = pop(stack);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(RewardFault::NonFiniteResult)
        }
    }
}

#[inline]
fn pop(stack: &mut Vec<f64>) -> f64 {
    // the compiler guarantees balanced stack programs
    stack.pop().unwrap_or(f64::NAN)
}

#[inline]
fn unary(stack: &mut Vec<f64>, f: impl Fn(f64) -> f64) {
    let v = pop(stack);
    stack.push(f(v));
}
