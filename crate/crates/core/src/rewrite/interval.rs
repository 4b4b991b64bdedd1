use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::eval::{eval_exact, eval_f64_env, Env};
use super::pred::Truth;
use num_traits::Signed;

use crate::term::{Number, Term};

/// An interval whose bounds are terms (e.g. `{0<..<r}`), decided once the
/// bounds' identifiers are bound.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Term", into = "Term")]
pub struct Interval {
    pub lower: Term,
    pub upper: Term,
    pub lower_open: bool,
    pub upper_open: bool,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("`{0}` is not an interval")]
pub struct NotAnInterval(pub String);

impl Interval {
    pub fn open(lower: Term, upper: Term) -> Self {
        Interval { lower, upper, lower_open: true, upper_open: true }
    }

    pub fn op_name(&self) -> &'static str {
        match (self.lower_open, self.upper_open) {
            (true, true) => "ivl_oo",
            (false, true) => "ivl_co",
            (true, false) => "ivl_oc",
            (false, false) => "ivl_cc",
        }
    }

    pub fn to_term(&self) -> Term {
        Term::apply(self.op_name(), vec![self.lower.clone(), self.upper.clone()])
    }

    pub fn from_term(t: &Term) -> Result<Self, NotAnInterval> {
        let (lo_open, hi_open) = match t.op() {
            Some("ivl_oo") => (true, true),
            Some("ivl_co") => (false, true),
            Some("ivl_oc") => (true, false),
            Some("ivl_cc") => (false, false),
            _ => return Err(NotAnInterval(t.to_string())),
        };
        let a = t.args();
        Ok(Interval { lower: a[0].clone(), upper: a[1].clone(), lower_open: lo_open, upper_open: hi_open })
    }

    /// Whether lower < upper holds under `env` (undecided when unbound).
    pub fn well_formed(&self, env: &Env) -> Truth {
        compare(&self.lower, &self.upper, env).map_or(Truth::Undecided, |o| Truth::from(o == Order::Less))
    }
}

impl TryFrom<Term> for Interval {
    type Error = NotAnInterval;

    fn try_from(t: Term) -> Result<Self, Self::Error> {
        Interval::from_term(&t)
    }
}

impl From<Interval> for Term {
    fn from(iv: Interval) -> Term {
        iv.to_term()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

/// Sign lattice for expressions that cannot be evaluated to a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Pos,
    Neg,
    Zero,
    NonNeg,
    NonPos,
    Unknown,
}

impl Sign {
    fn of_f64(v: f64) -> Sign {
        if v > 0.0 {
            Sign::Pos
        } else if v < 0.0 {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }

    fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
            Sign::NonNeg => Sign::NonPos,
            Sign::NonPos => Sign::NonNeg,
            s => s,
        }
    }

    fn add(self, o: Sign) -> Sign {
        use Sign::*;
        match (self, o) {
            (Zero, s) | (s, Zero) => s,
            (Pos, Pos) | (Pos, NonNeg) | (NonNeg, Pos) => Pos,
            (NonNeg, NonNeg) => NonNeg,
            (Neg, Neg) | (Neg, NonPos) | (NonPos, Neg) => Neg,
            (NonPos, NonPos) => NonPos,
            _ => Unknown,
        }
    }

    fn mul(self, o: Sign) -> Sign {
        use Sign::*;
        match (self, o) {
            (Zero, _) | (_, Zero) => Zero,
            (Unknown, _) | (_, Unknown) => Unknown,
            (Pos, s) => s,
            (s, Pos) => s,
            (Neg, s) => s.flip(),
            (s, Neg) => s.flip(),
            (NonNeg, NonNeg) | (NonPos, NonPos) => NonNeg,
            (NonNeg, NonPos) | (NonPos, NonNeg) => NonPos,
        }
    }
}

/// Sign of `t` on its real domain. Square roots are nonnegative wherever
/// defined, which is what decides `c*sqrt(e)` without knowing `e`.
pub fn sign_of(t: &Term, env: &Env) -> Sign {
    if let Some(q) = eval_exact(t, env) {
        return if q.is_positive() {
            Sign::Pos
        } else if q.is_negative() {
            Sign::Neg
        } else {
            Sign::Zero
        };
    }
    if t.free_vars().iter().all(|v| env.contains_key(v)) {
        if let Some(v) = eval_f64_env(t, env) {
            // only trust floats clearly away from zero
            if v.abs() > 1e-9 {
                return Sign::of_f64(v);
            }
        }
    }
    match t {
        Term::Number(n) => Sign::of_f64(n.to_f64()),
        Term::Constant(c) if c == "pi" => Sign::Pos,
        Term::Apply(op, a) => match (op.as_str(), a.len()) {
            ("neg", 1) => sign_of(&a[0], env).flip(),
            ("plus", 2) => sign_of(&a[0], env).add(sign_of(&a[1], env)),
            ("minus", 2) => sign_of(&a[0], env).add(sign_of(&a[1], env).flip()),
            ("times", 2) => sign_of(&a[0], env).mul(sign_of(&a[1], env)),
            ("div", 2) => match sign_of(&a[1], env) {
                Sign::Pos => sign_of(&a[0], env),
                Sign::Neg => sign_of(&a[0], env).flip(),
                _ => Sign::Unknown,
            },
            ("sqrt", 1) => match sign_of(&a[0], env) {
                Sign::Pos => Sign::Pos,
                Sign::Zero => Sign::Zero,
                _ => Sign::NonNeg,
            },
            ("pow", 2) => {
                let base = sign_of(&a[0], env);
                match a[1].as_number() {
                    Some(Number::Exact(e)) if e.is_integer() && e.to_integer() % 2 == 0.into() => {
                        if base == Sign::Pos || base == Sign::Neg { Sign::Pos } else { Sign::NonNeg }
                    }
                    _ if base == Sign::Pos => Sign::Pos,
                    _ => Sign::Unknown,
                }
            }
            _ => Sign::Unknown,
        },
        _ => Sign::Unknown,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Order {
    Less,
    Equal,
    Greater,
}

fn compare(a: &Term, b: &Term, env: &Env) -> Option<Order> {
    match sign_of(&Term::binary("minus", a.clone(), b.clone()), env) {
        Sign::Neg => Some(Order::Less),
        Sign::Zero => Some(Order::Equal),
        Sign::Pos => Some(Order::Greater),
        _ => None,
    }
}

/// Membership of `value` in `iv` under `env`. Decided when the value is
/// numerically instantiable, or when sign analysis of the differences to
/// the bounds settles one side.
pub fn in_interval(value: &Term, iv: &Interval, env: &Env) -> Truth {
    let lo = sign_of(&Term::binary("minus", value.clone(), iv.lower.clone()), env);
    let hi = sign_of(&Term::binary("minus", iv.upper.clone(), value.clone()), env);
    let side = |s: Sign, open: bool| -> Truth {
        match s {
            Sign::Pos => Truth::True,
            Sign::Zero => Truth::from(!open),
            Sign::Neg => Truth::False,
            Sign::NonPos if open => Truth::False,
            Sign::NonNeg if !open => Truth::True,
            _ => Truth::Undecided,
        }
    };
    side(lo, iv.lower_open).and(side(hi, iv.upper_open))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{parse, Signature};

    fn t(s: &str) -> Term {
        parse(s, &Signature::full()).unwrap()
    }

    fn env7() -> Env {
        [("r".to_string(), Term::int(7))].into()
    }

    #[test]
    fn negative_root_is_outside() {
        let iv = Interval::from_term(&t("{0<..<r}")).unwrap();
        assert_eq!(in_interval(&t("-2*sqrt(r^2-(u/2)^2)"), &iv, &env7()), Truth::False);
        assert_eq!(in_interval(&t("r/2"), &iv, &env7()), Truth::True);
        assert_eq!(in_interval(&t("u+1"), &iv, &env7()), Truth::Undecided);
    }

    #[test]
    fn positive_root_is_undecided_symbolically() {
        let iv = Interval::from_term(&t("{0<..<r}")).unwrap();
        // nonnegative, but could be zero or exceed r
        assert_eq!(in_interval(&t("2*sqrt(r^2-(u/2)^2)"), &iv, &env7()), Truth::Undecided);
    }

    #[test]
    fn closed_bounds() {
        let iv = Interval::from_term(&t("{0<=..<=1}")).unwrap();
        assert_eq!(in_interval(&Term::int(0), &iv, &Env::new()), Truth::True);
        assert_eq!(in_interval(&Term::int(2), &iv, &Env::new()), Truth::False);
    }
}
