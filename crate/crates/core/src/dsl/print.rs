use super::ast::{Expr, RewardProgram};

const ATOM: u8 = 3;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, _, _) => op.precedence(),
        _ => ATOM,
    }
}

/// Formats a literal so that the lexer reads back the identical value.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v:?}")
    }
}

pub fn format_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Num(v) => out.push_str(&format_number(*v)),
        Expr::Var(name) => out.push_str(name),
        Expr::Index(name, i) => {
            out.push_str(name);
            out.push('[');
            out.push_str(&i.to_string());
            out.push(']');
        }
        Expr::Neg(inner) => {
            out.push('-');
            write_wrapped(out, inner, precedence(inner) < ATOM);
        }
        Expr::Binary(op, lhs, rhs) => {
            let p = op.precedence();
            write_wrapped(out, lhs, precedence(lhs) < p);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            // Operators are left-associative, so an equal-precedence right operand keeps its parens.
            write_wrapped(out, rhs, precedence(rhs) <= p);
        }
        Expr::Call(func, args) => {
            out.push_str(func.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}

fn write_wrapped(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

/// Canonical source form: one binding per line, then the return line.
pub fn pretty_print(program: &RewardProgram) -> String {
    let mut lines: Vec<String> = program
        .bindings
        .iter()
        .map(|(name, e)| format!("{name} = {}", format_expr(e)))
        .collect();
    lines.push(format!("return {}", format_expr(&program.result)));
    lines.join("\n")
}
