//! Built-in template functions (`nth`, `lhs`, `calc`, ...). They are
//! reduced away once their arguments are concrete.

use super::eval::{eval_number, Env};
use crate::term::{is_pattern_var, Number, Term};

/// Name of the structural built-in functions reduced by [`reduce`].
pub const FUNCTIONS: &[&str] = &["nth", "lhs", "rhs", "len", "first_var", "calc", "degree"];

/// Reduces built-in function applications bottom-up. Fails with a message
/// when a built-in cannot be reduced (wrong argument shape, index out of
/// range, non-numeric `calc`).
pub fn reduce(t: &Term, env: &Env) -> Result<Term, String> {
    match t {
        Term::Apply(op, args) => {
            let args: Vec<Term> = args.iter().map(|a| reduce(a, env)).collect::<Result<_, _>>()?;
            if FUNCTIONS.contains(&op.as_str()) {
                reduce_one(op.as_str(), &args, env)
            } else {
                Ok(Term::Apply(op.clone(), args))
            }
        }
        Term::Binder(k, n, body) => Ok(Term::binder(*k, n.clone(), reduce(body, env)?)),
        _ => Ok(t.clone()),
    }
}

fn reduce_one(op: &str, args: &[Term], env: &Env) -> Result<Term, String> {
    let arg = |i: usize| args.get(i).ok_or_else(|| format!("{op}: missing argument {i}"));
    match op {
        "nth" => {
            let list = arg(0)?.as_list().ok_or_else(|| format!("nth: `{}` is not a list", args[0]))?;
            let i = index(arg(1)?)?;
            list.get(i).cloned().ok_or_else(|| format!("nth: index {i} out of range for list of {}", list.len()))
        }
        "lhs" | "rhs" => {
            let (l, r) = arg(0)?.as_equation().ok_or_else(|| format!("{op}: `{}` is not an equation", args[0]))?;
            Ok(if op == "lhs" { l.clone() } else { r.clone() })
        }
        "len" => {
            let list = arg(0)?.as_list().ok_or_else(|| format!("len: `{}` is not a list", args[0]))?;
            Ok(Term::int(list.len() as i64))
        }
        "first_var" => arg(0)?
            .free_vars()
            .into_iter()
            .find(|v| !is_pattern_var(v) && !env.contains_key(v))
            .map(Term::var)
            .ok_or_else(|| format!("first_var: `{}` has no unknowns", args[0])),
        "calc" => {
            let digits = args.iter().find_map(|a| a.as_number().filter(|n| !n.is_exact())).map(float_digits);
            eval_number(arg(0)?, env, digits.unwrap_or(2))
                .map(Term::Number)
                .ok_or_else(|| format!("calc: `{}` is not numeric", args[0]))
        }
        "degree" => {
            let x = arg(1)?.as_var().ok_or("degree: second argument must be a variable")?;
            poly_degree(arg(0)?, x).map(|d| Term::int(d as i64)).ok_or_else(|| format!("degree: `{}` is not polynomial in {x}", args[0]))
        }
        _ => unreachable!("not a built-in function: {op}"),
    }
}

fn float_digits(n: &Number) -> u8 {
    match n {
        Number::Float { digits, .. } => *digits,
        _ => 2,
    }
}

fn index(t: &Term) -> Result<usize, String> {
    match t.as_number() {
        Some(n) if n.is_integer() && !n.is_negative() => Ok(n.to_f64() as usize),
        _ => Err(format!("`{t}` is not an index")),
    }
}

/// Degree in `x` when `t` is a polynomial in `x` (coefficients free of `x`);
/// equations count both sides.
pub fn poly_degree(t: &Term, x: &str) -> Option<u32> {
    if !t.occurs_free(x) {
        return Some(0);
    }
    match t {
        Term::Variable(v) if v == x => Some(1),
        Term::Apply(op, a) => match (op.as_str(), a.len()) {
            ("plus" | "minus" | "eq", 2) => Some(poly_degree(&a[0], x)?.max(poly_degree(&a[1], x)?)),
            ("times", 2) => Some(poly_degree(&a[0], x)? + poly_degree(&a[1], x)?),
            ("neg", 1) => poly_degree(&a[0], x),
            ("div", 2) if !a[1].occurs_free(x) => poly_degree(&a[0], x),
            ("pow", 2) => match a[1].as_number() {
                Some(n) if n.is_exact() && n.is_integer() && !n.is_negative() => {
                    let e = n.to_f64() as u32;
                    Some(poly_degree(&a[0], x)? * e)
                }
                _ => None,
            },
            _ => None,
        },
        _ => None,
    }
}
