//! Recursive-descent parser for reward programs.
//!
//! ```text
//! program := binding* "return" expr
//! binding := IDENT "=" expr
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | atom
//! atom    := NUMBER | IDENT | IDENT "[" INT "]" | FN "(" expr ("," expr)* ")" | "(" expr ")"
//! ```

use std::collections::HashSet;

use super::ast::{BinOp, Expr, Func, RewardProgram};
use super::lexer::{tokenize, Tok, Token};
use super::DslError;

pub(crate) const RETURN: &str = "return";

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> DslError {
        let t = self.peek();
        DslError::syntax(t.line, t.column, message)
    }

    fn expect(&mut self, want: Tok) -> Result<Token, DslError> {
        if self.peek().tok == want {
            Ok(self.bump())
        } else {
            Err(self.error(format!("expected {}, found {}", want.describe(), self.peek().tok.describe())))
        }
    }

    fn program(&mut self, source: &str) -> Result<RewardProgram, DslError> {
        if self.peek().tok == Tok::Eof {
            return Err(DslError::EmptyProgram);
        }
        let mut bindings = Vec::new();
        let mut seen = HashSet::new();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Ident(name) if name == RETURN => {
                    self.bump();
                    break;
                }
                Tok::Ident(name) => {
                    if Func::from_name(name).is_some() {
                        return Err(self.error(format!("`{name}` is a built-in function and cannot be assigned")));
                    }
                    if !seen.insert(name.clone()) {
                        return Err(self.error(format!("`{name}` is assigned more than once")));
                    }
                    self.bump();
                    self.expect(Tok::Assign)?;
                    let value = self.expr()?;
                    bindings.push((name.clone(), value));
                }
                Tok::Eof => return Err(self.error("expected `return`")),
                other => {
                    return Err(self.error(format!("expected an assignment or `return`, found {}", other.describe())))
                }
            }
        }
        let result = self.expr()?;
        if self.peek().tok != Tok::Eof {
            return Err(self.error(format!("unexpected {} after the return expression", self.peek().tok.describe())));
        }
        Ok(RewardProgram {
            bindings,
            result,
            source: source.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, DslError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Number(v, _) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if name == RETURN {
                    return Err(self.error("`return` cannot appear inside an expression"));
                }
                if *self.peek_at(1) == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| self.error(format!("unknown function `{name}`")))?;
                    self.bump();
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while self.peek().tok == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    if self.peek().tok != Tok::RParen {
                        return Err(self.error(format!("expected `,` or `)`, found {}", self.peek().tok.describe())));
                    }
                    if args.len() != func.arity() {
                        return Err(DslError::syntax(
                            t.line,
                            t.column,
                            format!("`{name}` takes {} argument(s), got {}", func.arity(), args.len()),
                        ));
                    }
                    self.bump();
                    return Ok(Expr::Call(func, args));
                }
                if Func::from_name(&name).is_some() {
                    return Err(self.error(format!("function `{name}` must be called with parentheses")));
                }
                self.bump();
                if self.peek().tok == Tok::LBracket {
                    self.bump();
                    let idx_tok = self.peek().clone();
                    let index = match idx_tok.tok {
                        Tok::Number(v, true) if v <= u32::MAX as f64 => v as usize,
                        _ => return Err(self.error("expected a non-negative integer index")),
                    };
                    self.bump();
                    self.expect(Tok::RBracket)?;
                    return Ok(Expr::Index(name, index));
                }
                Ok(Expr::Var(name))
            }
            other => Err(self.error(format!("expected an expression, found {}", other.describe()))),
        }
    }
}

/// Parses the body of a reward fence.
pub fn parse_program(source: &str) -> Result<RewardProgram, DslError> {
    let tokens = tokenize(source)?;
    Parser { tokens, pos: 0 }.program(source)
}
