use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Built-in functions. The reductions take a bare vector variable name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Abs,
    Sq,
    Sqrt,
    Exp,
    Tanh,
    Min,
    Max,
    Clip,
    Norm,
    Sum,
    SumSq,
    Mean,
}

impl Func {
    pub const ALL: [Func; 12] = [
        Func::Abs,
        Func::Sq,
        Func::Sqrt,
        Func::Exp,
        Func::Tanh,
        Func::Min,
        Func::Max,
        Func::Clip,
        Func::Norm,
        Func::Sum,
        Func::SumSq,
        Func::Mean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sq => "sq",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Min => "min",
            Func::Max => "max",
            Func::Clip => "clip",
            Func::Norm => "norm",
            Func::Sum => "sum",
            Func::SumSq => "sum_sq",
            Func::Mean => "mean",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            Func::Clip => 3,
            _ => 1,
        }
    }

    pub fn is_reduction(self) -> bool {
        matches!(self, Func::Norm | Func::Sum | Func::SumSq | Func::Mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Var(String),
    Index(String, usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }
}

/// A parsed reward program: ordered bindings followed by a result expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardProgram {
    pub bindings: Vec<(String, Expr)>,
    pub result: Expr,
    pub source: String,
}

impl RewardProgram {
    /// Equality of bindings and result, ignoring the source text.
    pub fn same_structure(&self, other: &RewardProgram) -> bool {
        self.bindings == other.bindings && self.result == other.result
    }
}
