use std::fmt;

use serde::{Deserialize, Serialize};

use super::builtins::{poly_degree, reduce};
use super::eval::{eval_exact, eval_f64_env, Env};
use super::matching::{substitute, Substitution};
use crate::term::{is_pattern_var, term_cmp, BinderKind, Term};

/// Three-valued outcome of a predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    True,
    False,
    Undecided,
}

impl Truth {
    pub fn and(self, o: Truth) -> Truth {
        match (self, o) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Undecided,
        }
    }

    pub fn or(self, o: Truth) -> Truth {
        match (self, o) {
            (Truth::True, _) | (_, Truth::True) => Truth::True,
            (Truth::False, Truth::False) => Truth::False,
            _ => Truth::Undecided,
        }
    }

    pub fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Undecided => Truth::Undecided,
        }
    }

    pub fn is_true(self) -> bool {
        self == Truth::True
    }
}

impl From<bool> for Truth {
    fn from(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truth::True => "true",
            Truth::False => "false",
            Truth::Undecided => "undecided",
        })
    }
}

/// Relative gap below which two float values are not trusted to differ.
const FLOAT_TIE: f64 = 1e-12;

/// Evaluates a predicate. Pattern variables (`?e`) bound in `env` are
/// substituted structurally first, so structural built-ins (`indep`,
/// `is_root_in`, ...) see the actual terms; plain identifiers in `env`
/// supply numeric values for comparisons.
pub fn eval_pred(p: &Term, env: &Env) -> Truth {
    let metas: Substitution = env.iter().filter(|(k, _)| is_pattern_var(k)).map(|(k, v)| (k.clone(), v.clone())).collect();
    let p = substitute(&metas, p);
    let p = match reduce(&p, env) {
        Ok(p) => p,
        Err(_) => return Truth::Undecided,
    };
    truth(&p, env)
}

fn truth(p: &Term, env: &Env) -> Truth {
    let Term::Apply(op, a) = p else {
        return match p {
            Term::Variable(v) => match env.get(v) {
                Some(t) if t != p => truth(t, env),
                _ => Truth::Undecided,
            },
            _ => Truth::Undecided,
        };
    };
    match (op.as_str(), a.len()) {
        ("and", 2) => truth(&a[0], env).and(truth(&a[1], env)),
        ("or", 2) => truth(&a[0], env).or(truth(&a[1], env)),
        ("implies", 2) => truth(&a[0], env).not().or(truth(&a[1], env)),
        ("not", 1) => truth(&a[0], env).not(),
        ("eq", 2) => {
            if a[0] == a[1] {
                return Truth::True;
            }
            compare(&a[0], &a[1], env).map_or(Truth::Undecided, |o| Truth::from(o == std::cmp::Ordering::Equal))
        }
        ("neq", 2) => truth(&Term::eq(a[0].clone(), a[1].clone()), env).not(),
        ("lt" | "le" | "gt" | "ge", 2) => match compare(&a[0], &a[1], env) {
            None => Truth::Undecided,
            Some(o) => Truth::from(match op.as_str() {
                "lt" => o.is_lt(),
                "le" => o.is_le(),
                "gt" => o.is_gt(),
                _ => o.is_ge(),
            }),
        },
        ("is_num", 1) => Truth::from(matches!(a[0], Term::Number(_))),
        ("is_atom", 1) => Truth::from(a[0].is_leaf()),
        ("indep", 2) => match a[1].as_var() {
            Some(x) => Truth::from(!a[0].occurs_free(x)),
            None => Truth::Undecided,
        },
        ("before", 2) => Truth::from(term_cmp(&a[0], &a[1]).is_lt()),
        ("has_head", 2) => match a[1].as_var() {
            Some(h) => Truth::from(a[0].op() == Some(h) || matches!(&a[0], Term::Binder(k, ..) if k.op_name() == h)),
            None => Truth::Undecided,
        },
        ("has_deriv", 1) => Truth::from(a[0].contains_binder(BinderKind::Deriv)),
        ("is_poly_in", 2) => match a[1].as_var() {
            Some(x) => Truth::from(a[0].occurs_free(x) && poly_degree(&a[0], x).is_some()),
            None => Truth::Undecided,
        },
        ("is_root_in", 2) => match a[1].as_var() {
            Some(x) => Truth::from(root_in(&a[0], x)),
            None => Truth::Undecided,
        },
        ("is_normal", 1) => Truth::from(a[0].as_equation().is_some_and(|(_, r)| r.as_number().is_some_and(|n| n.is_zero()))),
        _ => Truth::Undecided,
    }
}

/// Whether `x` occurs under a square root.
fn root_in(t: &Term, x: &str) -> bool {
    match t {
        Term::Apply(op, a) if op.as_str() == "sqrt" => a[0].occurs_free(x),
        _ => t.children().into_iter().any(|c| root_in(c, x)),
    }
}

fn compare(a: &Term, b: &Term, env: &Env) -> Option<std::cmp::Ordering> {
    if let (Some(x), Some(y)) = (eval_exact(a, env), eval_exact(b, env)) {
        return Some(x.cmp(&y));
    }
    let x = eval_f64_env(a, env)?;
    let y = eval_f64_env(b, env)?;
    let scale = x.abs().max(y.abs()).max(1.0);
    if (x - y).abs() <= FLOAT_TIE * scale {
        return None;
    }
    x.partial_cmp(&y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{parse, Signature};

    fn t(s: &str) -> Term {
        parse(s, &Signature::full()).unwrap()
    }

    #[test]
    fn where_condition() {
        let env7: Env = [("r".to_string(), Term::int(7))].into();
        assert_eq!(eval_pred(&t("0 < r"), &env7), Truth::True);
        assert_eq!(eval_pred(&t("0 < r"), &Env::new()), Truth::Undecided);
        assert_eq!(eval_pred(&t("1 < 0"), &Env::new()), Truth::False);
    }

    #[test]
    fn structural_builtins() {
        let env: Env = [("?e".to_string(), t("sqrt(x+1) = 2")), ("?v".to_string(), t("x"))].into();
        assert_eq!(eval_pred(&t("is_root_in(?e, ?v)"), &env), Truth::True);
        assert_eq!(eval_pred(&t("is_poly_in(?e, ?v)"), &env), Truth::False);
        assert_eq!(eval_pred(&t("indep(2*r, u)"), &Env::new()), Truth::True);
        assert_eq!(eval_pred(&t("is_num(2) & ~is_num(a)"), &Env::new()), Truth::True);
    }

    #[test]
    fn three_valued_logic() {
        assert_eq!(eval_pred(&t("a < 1 | 0 < 1"), &Env::new()), Truth::True);
        assert_eq!(eval_pred(&t("a < 1 & 0 < 1"), &Env::new()), Truth::Undecided);
        assert_eq!(eval_pred(&t("a < 1 & 1 < 0"), &Env::new()), Truth::False);
    }
}
