//! Numeric evaluation: exact over rationals where possible, otherwise
//! floating point. Derivative binders are evaluated with dual numbers, which
//! makes the float evaluator an independent check on the differentiation
//! rules.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::term::{exact_sqrt, BinderKind, Number, Term};

/// Identifier → value bindings for evaluation.
pub type Env = BTreeMap<String, Term>;

/// Largest exponent evaluated exactly; beyond this numbers grow silly.
const MAX_EXACT_EXP: i64 = 256;

/// Exact rational value, if `t` is closed under `env` and only uses
/// rational operations (square roots only of perfect squares).
pub fn eval_exact(t: &Term, env: &Env) -> Option<BigRational> {
    exact(t, env, 0)
}

fn exact(t: &Term, env: &Env, depth: usize) -> Option<BigRational> {
    if depth > 64 {
        return None;
    }
    match t {
        Term::Number(Number::Exact(q)) => Some(q.clone()),
        Term::Number(_) => None,
        Term::Variable(v) => exact(env.get(v)?, env, depth + 1),
        Term::Constant(_) | Term::Binder(..) => None,
        Term::Apply(op, args) => {
            let a = |i: usize| exact(&args[i], env, depth);
            match (op.as_str(), args.len()) {
                ("plus", 2) => Some(a(0)? + a(1)?),
                ("minus", 2) => Some(a(0)? - a(1)?),
                ("times", 2) => Some(a(0)? * a(1)?),
                ("div", 2) => {
                    let d = a(1)?;
                    (!d.is_zero()).then(|| a(0)).flatten().map(|n| n / d)
                }
                ("neg", 1) => Some(-a(0)?),
                ("pow", 2) => {
                    let b = a(0)?;
                    let e = a(1)?;
                    if !e.is_integer() {
                        // x^(1/2) style exponents only for perfect squares
                        if *e.denom() == BigInt::from(2) && !b.is_negative() {
                            let r = exact_sqrt(&b)?;
                            return pow_int(&r, e.numer().to_i64()?);
                        }
                        return None;
                    }
                    pow_int(&b, e.to_integer().to_i64()?)
                }
                ("sqrt", 1) => {
                    let x = a(0)?;
                    if x.is_negative() {
                        None
                    } else {
                        exact_sqrt(&x)
                    }
                }
                ("calc", 1) => a(0),
                _ => None,
            }
        }
    }
}

fn pow_int(b: &BigRational, e: i64) -> Option<BigRational> {
    if e.abs() > MAX_EXACT_EXP {
        return None;
    }
    if e < 0 {
        if b.is_zero() {
            return None;
        }
        return Some(num_traits::pow(b.recip(), e.unsigned_abs() as usize));
    }
    Some(num_traits::pow(b.clone(), e as usize))
}

/// Floating value of a closed term under `env`; `None` when some name is
/// unbound or the value is not a finite real.
pub fn eval_f64(t: &Term, env: &BTreeMap<String, f64>) -> Option<f64> {
    let v = dual(t, &to_duals(env), None)?.re;
    v.is_finite().then_some(v)
}

/// Like [`eval_f64`] but variables may also be bound to terms.
pub fn eval_f64_env(t: &Term, env: &Env) -> Option<f64> {
    let mut nums = BTreeMap::new();
    for (k, v) in env {
        if let Some(x) = eval_f64_env_inner(v, env, 0) {
            nums.insert(k.clone(), x);
        }
    }
    eval_f64(t, &nums)
}

fn eval_f64_env_inner(t: &Term, env: &Env, depth: usize) -> Option<f64> {
    if depth > 16 {
        return None;
    }
    let mut nums = BTreeMap::new();
    for v in t.free_vars() {
        let bound = env.get(&v)?;
        nums.insert(v, eval_f64_env_inner(bound, env, depth + 1)?);
    }
    eval_f64(t, &nums)
}

fn to_duals(env: &BTreeMap<String, f64>) -> BTreeMap<String, Dual> {
    env.iter().map(|(k, v)| (k.clone(), Dual::constant(*v))).collect()
}

/// Value and first derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn constant(re: f64) -> Self {
        Dual { re, eps: 0.0 }
    }

    fn add(self, o: Dual) -> Dual {
        Dual { re: self.re + o.re, eps: self.eps + o.eps }
    }

    fn sub(self, o: Dual) -> Dual {
        Dual { re: self.re - o.re, eps: self.eps - o.eps }
    }

    fn mul(self, o: Dual) -> Dual {
        Dual { re: self.re * o.re, eps: self.re * o.eps + self.eps * o.re }
    }

    fn div(self, o: Dual) -> Option<Dual> {
        if o.re == 0.0 {
            return None;
        }
        Some(Dual { re: self.re / o.re, eps: (self.eps * o.re - self.re * o.eps) / (o.re * o.re) })
    }

    fn powf(self, o: Dual) -> Option<Dual> {
        let re = self.re.powf(o.re);
        if !re.is_finite() {
            return None;
        }
        // d(a^b) = b a^(b-1) a' + a^b ln(a) b'
        let mut eps = 0.0;
        if self.eps != 0.0 {
            eps += o.re * self.re.powf(o.re - 1.0) * self.eps;
        }
        if o.eps != 0.0 {
            if self.re <= 0.0 {
                return None;
            }
            eps += re * self.re.ln() * o.eps;
        }
        Some(Dual { re, eps })
    }
}

/// `wrt` names the variable currently being differentiated (its dual part
/// is 1); nested derivatives are not supported.
fn dual(t: &Term, env: &BTreeMap<String, Dual>, wrt: Option<&str>) -> Option<Dual> {
    let ok = |d: Dual| (d.re.is_finite() && d.eps.is_finite()).then_some(d);
    match t {
        Term::Number(n) => Some(Dual::constant(n.to_f64())),
        Term::Variable(v) => env.get(v).copied(),
        Term::Constant(c) if c == "pi" => Some(Dual::constant(std::f64::consts::PI)),
        Term::Constant(_) => None,
        Term::Binder(BinderKind::Deriv, x, body) => {
            if wrt.is_some() {
                return None;
            }
            let at = env.get(x)?;
            let mut inner = env.clone();
            inner.insert(x.clone(), Dual { re: at.re, eps: 1.0 });
            let d = dual(body, &inner, Some(x))?;
            Some(Dual::constant(d.eps))
        }
        Term::Binder(..) => None,
        Term::Apply(op, args) => {
            let a = |i: usize| dual(&args[i], env, wrt);
            let r = match (op.as_str(), args.len()) {
                ("plus", 2) => a(0)?.add(a(1)?),
                ("minus", 2) => a(0)?.sub(a(1)?),
                ("times", 2) => a(0)?.mul(a(1)?),
                ("div", 2) => a(0)?.div(a(1)?)?,
                ("neg", 1) => Dual::constant(0.0).sub(a(0)?),
                ("pow", 2) => {
                    let b = a(0)?;
                    let e = a(1)?;
                    if e.eps == 0.0 && e.re.fract() == 0.0 && e.re.abs() < 1e6 {
                        let n = e.re as i32;
                        if n == 0 {
                            Dual::constant(1.0)
                        } else {
                            let re = b.re.powi(n);
                            Dual { re, eps: n as f64 * b.re.powi(n - 1) * b.eps }
                        }
                    } else {
                        b.powf(e)?
                    }
                }
                ("sqrt", 1) => {
                    let x = a(0)?;
                    if x.re < 0.0 {
                        return None;
                    }
                    let s = x.re.sqrt();
                    let eps = if x.eps == 0.0 { 0.0 } else { x.eps / (2.0 * s) };
                    Dual { re: s, eps }
                }
                ("sin", 1) => {
                    let x = a(0)?;
                    Dual { re: x.re.sin(), eps: x.re.cos() * x.eps }
                }
                ("cos", 1) => {
                    let x = a(0)?;
                    Dual { re: x.re.cos(), eps: -x.re.sin() * x.eps }
                }
                ("exp", 1) => {
                    let x = a(0)?;
                    Dual { re: x.re.exp(), eps: x.re.exp() * x.eps }
                }
                ("ln", 1) => {
                    let x = a(0)?;
                    if x.re <= 0.0 {
                        return None;
                    }
                    Dual { re: x.re.ln(), eps: x.eps / x.re }
                }
                ("calc", 1) => a(0)?,
                _ => return None,
            };
            ok(r)
        }
    }
}

/// Evaluates `t` exactly if possible, else as a float with `digits`
/// significant decimals; `None` if not closed under `env`.
pub fn eval_number(t: &Term, env: &Env, digits: u8) -> Option<Number> {
    if let Some(q) = eval_exact(t, env) {
        return Some(Number::Exact(q));
    }
    eval_f64_env(t, env).map(|v| Number::float(v, digits))
}

/// Round-to-decimals helper used when presenting float results.
pub fn round_to(v: f64, digits: u8) -> f64 {
    let f = 10f64.powi(digits as i32);
    (v * f).round() / f
}
