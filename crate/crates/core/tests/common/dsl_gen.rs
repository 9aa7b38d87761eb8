//! Random well-typed reward programs, generated as source text together with a
//! tree that a direct recursive evaluator walks.

use curriculum_core::dsl::RewardFault;
use curriculum_core::env::EnvironmentDefinition;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fault {
    Division,
    NonFinite,
}

impl From<RewardFault> for Fault {
    fn from(f: RewardFault) -> Self {
        match f {
            RewardFault::DivisionByNearZero => Fault::Division,
            RewardFault::NonFiniteResult => Fault::NonFinite,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Red {
    Norm,
    Sum,
    SumSq,
    Mean,
}

#[derive(Debug, Clone)]
pub enum Node {
    Num(f64),
    Obs(usize),
    Act(usize),
    Reduce(Red, bool, usize, usize),
    Bind(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Unary(&'static str, Box<Node>),
    Min(Box<Node>, Box<Node>),
    Max(Box<Node>, Box<Node>),
    Clip(Box<Node>, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub source: String,
    pub bindings: Vec<Node>,
    pub result: Node,
}

struct Var {
    name: String,
    dims: usize,
    offset: usize,
}

pub struct Generator<'a> {
    env: &'a EnvironmentDefinition,
    vars: Vec<Var>,
}

const UNARY: [&str; 5] = ["abs", "sq", "sqrt", "exp", "tanh"];
const REDUCTIONS: [(&str, Red); 4] = [("norm", Red::Norm), ("sum", Red::Sum), ("sum_sq", Red::SumSq), ("mean", Red::Mean)];

impl<'a> Generator<'a> {
    pub fn new(env: &'a EnvironmentDefinition) -> Self {
        // offsets recomputed from the registry rather than taken from the environment
        let mut offset = 0;
        let vars = env
            .variables
            .iter()
            .map(|v| {
                let var = Var {
                    name: v.name.clone(),
                    dims: v.dims,
                    offset,
                };
                offset += v.dims;
                var
            })
            .collect();
        Self { env, vars }
    }

    pub fn observation_dims(&self) -> usize {
        self.vars.iter().map(|v| v.dims).sum()
    }

    fn number(&self, rng: &mut ChaCha8Rng) -> (Node, String) {
        let text = match rng.random_range(0..4) {
            0 => format!("{}", rng.random_range(0..10)),
            1 => format!("{}.{}", rng.random_range(0..20), rng.random_range(0..100)),
            2 => format!("{}e-{}", rng.random_range(1..10), rng.random_range(1..12)),
            _ => format!("0.{:03}", rng.random_range(0..1000)),
        };
        (Node::Num(text.parse().unwrap()), text)
    }

    fn leaf(&self, rng: &mut ChaCha8Rng, bound: usize) -> (Node, String) {
        match rng.random_range(0..6) {
            0 => self.number(rng),
            1 if bound > 0 => {
                let j = rng.random_range(0..bound);
                (Node::Bind(j), format!("b{j}"))
            }
            2 => {
                let a = self.env.action_dims;
                if a == 1 {
                    return (Node::Act(0), "action".into());
                }
                if rng.random_bool(0.5) {
                    let i = rng.random_range(0..a);
                    (Node::Act(i), format!("action[{i}]"))
                } else {
                    let (name, r) = REDUCTIONS[rng.random_range(0..4)];
                    (Node::Reduce(r, true, 0, a), format!("{name}(action)"))
                }
            }
            _ => {
                let v = &self.vars[rng.random_range(0..self.vars.len())];
                if v.dims == 1 {
                    return (Node::Obs(v.offset), v.name.clone());
                }
                if rng.random_bool(0.6) {
                    let i = rng.random_range(0..v.dims);
                    (Node::Obs(v.offset + i), format!("{}[{i}]", v.name))
                } else {
                    let (name, r) = REDUCTIONS[rng.random_range(0..4)];
                    (Node::Reduce(r, false, v.offset, v.dims), format!("{name}({})", v.name))
                }
            }
        }
    }

    fn expr(&self, rng: &mut ChaCha8Rng, depth: usize, bound: usize) -> (Node, String) {
        if depth == 0 || rng.random_bool(0.3) {
            return self.leaf(rng, bound);
        }
        match rng.random_range(0..6) {
            0 => {
                let (n, s) = self.expr(rng, depth - 1, bound);
                (Node::Neg(Box::new(n)), format!("(-{s})"))
            }
            1 | 2 => {
                let op = ['+', '-', '*', '/'][rng.random_range(0..4)];
                let (l, ls) = self.expr(rng, depth - 1, bound);
                let (r, rs) = self.expr(rng, depth - 1, bound);
                (Node::Bin(op, Box::new(l), Box::new(r)), format!("({ls} {op} {rs})"))
            }
            3 => {
                let f = UNARY[rng.random_range(0..UNARY.len())];
                let (n, s) = self.expr(rng, depth - 1, bound);
                (Node::Unary(f, Box::new(n)), format!("{f}({s})"))
            }
            4 => {
                let (a, as_) = self.expr(rng, depth - 1, bound);
                let (b, bs) = self.expr(rng, depth - 1, bound);
                if rng.random_bool(0.5) {
                    (Node::Min(Box::new(a), Box::new(b)), format!("min({as_}, {bs})"))
                } else {
                    (Node::Max(Box::new(a), Box::new(b)), format!("max({as_}, {bs})"))
                }
            }
            _ => {
                let (x, xs) = self.expr(rng, depth - 1, bound);
                let (lo, los) = self.expr(rng, depth - 1, bound);
                let (hi, his) = self.expr(rng, depth - 1, bound);
                (Node::Clip(Box::new(x), Box::new(lo), Box::new(hi)), format!("clip({xs}, {los}, {his})"))
            }
        }
    }

    pub fn program(&self, rng: &mut ChaCha8Rng) -> Generated {
        let n_bind = rng.random_range(0..4);
        let mut source = String::new();
        let mut bindings = Vec::new();
        for j in 0..n_bind {
            let (n, s) = self.expr(rng, 3, j);
            source.push_str(&format!("b{j} = {s}\n"));
            bindings.push(n);
        }
        let (result, s) = self.expr(rng, 4, n_bind);
        source.push_str(&format!("return {s}\n"));
        Generated {
            source,
            bindings,
            result,
        }
    }
}

fn eval(n: &Node, obs: &[f64], act: &[f64], slots: &[f64]) -> Result<f64, Fault> {
    Ok(match n {
        Node::Num(v) => *v,
        Node::Obs(i) => obs[*i],
        Node::Act(i) => act[*i],
        Node::Bind(j) => slots[*j],
        Node::Reduce(r, is_act, off, len) => {
            let xs = if *is_act { &act[*off..off + len] } else { &obs[*off..off + len] };
            let mut sum = 0.0;
            let mut sq = 0.0;
            for x in xs {
                sum += x;
                sq += x * x;
            }
            match r {
                Red::Norm => sq.sqrt(),
                Red::Sum => sum,
                Red::SumSq => sq,
                Red::Mean => sum / *len as f64,
            }
        }
        Node::Neg(a) => -eval(a, obs, act, slots)?,
        Node::Bin(op, l, r) => {
            let a = eval(l, obs, act, slots)?;
            let b = eval(r, obs, act, slots)?;
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                _ => {
                    if b.abs() < 1e-9 {
                        return Err(Fault::Division);
                    }
                    a / b
                }
            }
        }
        Node::Unary(f, a) => {
            let x = eval(a, obs, act, slots)?;
            match *f {
                "abs" => x.abs(),
                "sq" => x * x,
                // negative and NaN arguments clamp to 0
                "sqrt" => {
                    if x > 0.0 {
                        x.sqrt()
                    } else {
                        0.0
                    }
                }
                "exp" => x.exp(),
                _ => x.tanh(),
            }
        }
        Node::Min(a, b) => {
            let (x, y) = (eval(a, obs, act, slots)?, eval(b, obs, act, slots)?);
            x.min(y)
        }
        Node::Max(a, b) => {
            let (x, y) = (eval(a, obs, act, slots)?, eval(b, obs, act, slots)?);
            x.max(y)
        }
        Node::Clip(x, lo, hi) => {
            let (x, lo, hi) = (
                eval(x, obs, act, slots)?,
                eval(lo, obs, act, slots)?,
                eval(hi, obs, act, slots)?,
            );
            x.max(lo).min(hi)
        }
    })
}

/// Reference semantics: bindings and the result must be finite.
pub fn oracle(g: &Generated, obs: &[f64], act: &[f64]) -> Result<f64, Fault> {
    let mut slots = Vec::with_capacity(g.bindings.len());
    for b in &g.bindings {
        let v = eval(b, obs, act, &slots)?;
        if !v.is_finite() {
            return Err(Fault::NonFinite);
        }
        slots.push(v);
    }
    let v = eval(&g.result, obs, act, &slots)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Fault::NonFinite)
    }
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Random text built from DSL and prompt vocabulary, for crash testing.
pub fn token_soup(rng: &mut ChaCha8Rng) -> String {
    const WORDS: [&str; 40] = [
        "return", "=", "(", ")", "[", "]", ",", "+", "-", "*", "/", "\n", " ", "1", "0.5", "1e309", "99999999999",
        "norm", "sum_sq", "clip", "exp", "agent_pos", "dist_to_goal", "action", "x", "```reward\n", "```goal\n",
        "```\n", "goal_distance: [", "Task 1", "Name:", "Description:", "Reason:", "Decision: Agent ", "Agent 0:",
        "**", "#", "é", "\t", ":",
    ];
    let n = rng.random_range(0..60);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect()
}

pub fn random_bytes(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(0..200);
    let bytes: Vec<u8> = (0..n).map(|_| rng.random()).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}
