//! Static grounding of a reward program against an environment registry, and
//! compilation of the checked program into a flat stack program.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, Func, RewardProgram};
use super::DslError;
use crate::env::EnvironmentDefinition;

/// Name under which the action vector is visible to reward programs.
pub const ACTION: &str = "action";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefKind {
    /// A scalar variable read whole.
    Scalar,
    /// One component of a vector variable.
    Component(usize),
    /// A reduction applied to a whole vector variable.
    Reduction(Func),
    /// An earlier binding.
    Binding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRef {
    pub name: String,
    pub kind: RefKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Source {
    Obs,
    Act,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Op {
    Const(f64),
    Obs(usize),
    Act(usize),
    Load(usize),
    Store(usize),
    Neg,
    Bin(BinOp),
    Abs,
    Sq,
    Sqrt,
    Exp,
    Tanh,
    Min,
    Max,
    Clip,
    Reduce(Func, Source, usize, usize),
}

/// A reward program whose every reference resolved against one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedProgram {
    pub program: RewardProgram,
    pub env_id: String,
    pub references: Vec<ResolvedRef>,
    pub(crate) code: Vec<Op>,
    pub(crate) slots: usize,
    pub(crate) max_stack: usize,
}

struct Checker<'a> {
    env: &'a EnvironmentDefinition,
    bindings: HashMap<&'a str, usize>,
    refs: Vec<ResolvedRef>,
    code: Vec<Op>,
    depth: usize,
    max_depth: usize,
}

enum Target {
    Env { offset: usize, dims: usize, source: Source },
    Binding(usize),
}

impl<'a> Checker<'a> {
    fn lookup(&self, name: &str) -> Result<Target, DslError> {
        if let Some(&slot) = self.bindings.get(name) {
            return Ok(Target::Binding(slot));
        }
        if name == ACTION {
            return Ok(Target::Env {
                offset: 0,
                dims: self.env.action_dims,
                source: Source::Act,
            });
        }
        match self.env.variable_index(name) {
            Some(i) => Ok(Target::Env {
                offset: self.env.offset(i),
                dims: self.env.variables[i].dims,
                source: Source::Obs,
            }),
            None => Err(DslError::UnknownVariable(name.to_string())),
        }
    }

    fn emit(&mut self, op: Op, pops: usize, pushes: usize) {
        self.code.push(op);
        self.depth = self.depth - pops + pushes;
        self.max_depth = self.max_depth.max(self.depth);
    }

    fn push_ref(&mut self, name: &str, kind: RefKind) {
        self.refs.push(ResolvedRef {
            name: name.to_string(),
            kind,
        });
    }

    fn expr(&mut self, e: &Expr) -> Result<(), DslError> {
        match e {
            Expr::Num(v) => self.emit(Op::Const(*v), 0, 1),
            Expr::Var(name) => match self.lookup(name)? {
                Target::Binding(slot) => {
                    self.push_ref(name, RefKind::Binding);
                    self.emit(Op::Load(slot), 0, 1);
                }
                Target::Env { dims, .. } if dims != 1 => return Err(DslError::UnreducedVector(name.clone())),
                Target::Env { offset, source, .. } => {
                    self.push_ref(name, RefKind::Scalar);
                    let op = match source {
                        Source::Obs => Op::Obs(offset),
                        Source::Act => Op::Act(offset),
                    };
                    self.emit(op, 0, 1);
                }
            },
            Expr::Index(name, i) => match self.lookup(name)? {
                Target::Binding(_) => return Err(DslError::ScalarIndexed(name.clone())),
                Target::Env { dims: 1, .. } => return Err(DslError::ScalarIndexed(name.clone())),
                Target::Env { dims, .. } if *i >= dims => {
                    return Err(DslError::BadIndex {
                        name: name.clone(),
                        index: *i,
                        dims,
                    })
                }
                Target::Env { offset, source, .. } => {
                    self.push_ref(name, RefKind::Component(*i));
                    let op = match source {
                        Source::Obs => Op::Obs(offset + i),
                        Source::Act => Op::Act(offset + i),
                    };
                    self.emit(op, 0, 1);
                }
            },
            Expr::Neg(inner) => {
                self.expr(inner)?;
                self.emit(Op::Neg, 1, 1);
            }
            Expr::Binary(op, lhs, rhs) => {
                self.expr(lhs)?;
                self.expr(rhs)?;
                self.emit(Op::Bin(*op), 2, 1);
            }
            Expr::Call(func, args) if func.is_reduction() => {
                let name = match args.as_slice() {
                    [Expr::Var(name)] => name,
                    [Expr::Index(name, _)] => return Err(DslError::BadReduction(name.clone())),
                    _ => return Err(DslError::BadReduction(format!("{}(...)", func.name()))),
                };
                match self.lookup(name)? {
                    Target::Env { offset, dims, source } if dims > 1 => {
                        self.push_ref(name, RefKind::Reduction(*func));
                        self.emit(Op::Reduce(*func, source, offset, dims), 0, 1);
                    }
                    _ => return Err(DslError::BadReduction(name.clone())),
                }
            }
            Expr::Call(func, args) => {
                for a in args {
                    self.expr(a)?;
                }
                let op = match func {
                    Func::Abs => Op::Abs,
                    Func::Sq => Op::Sq,
                    Func::Sqrt => Op::Sqrt,
                    Func::Exp => Op::Exp,
                    Func::Tanh => Op::Tanh,
                    Func::Min => Op::Min,
                    Func::Max => Op::Max,
                    Func::Clip => Op::Clip,
                    _ => unreachable!("reductions handled above"),
                };
                self.emit(op, args.len(), 1);
            }
        }
        Ok(())
    }
}

/// Resolves every reference of `program` against `env` (plus `action`).
pub fn typecheck(program: &RewardProgram, env: &EnvironmentDefinition) -> Result<TypedProgram, DslError> {
    let mut checker = Checker {
        env,
        bindings: HashMap::new(),
        refs: Vec::new(),
        code: Vec::new(),
        depth: 0,
        max_depth: 0,
    };
    for (slot, (name, value)) in program.bindings.iter().enumerate() {
        if name == ACTION || env.variable(name).is_some() {
            return Err(DslError::ShadowedVariable(name.clone()));
        }
        checker.expr(value)?;
        checker.emit(Op::Store(slot), 1, 0);
        checker.bindings.insert(name.as_str(), slot);
    }
    checker.expr(&program.result)?;
    Ok(TypedProgram {
        program: program.clone(),
        env_id: env.id.clone(),
        references: checker.refs,
        code: checker.code,
        slots: program.bindings.len(),
        max_stack: checker.max_depth.max(1),
    })
}
