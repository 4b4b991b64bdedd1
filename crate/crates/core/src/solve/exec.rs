//! Executing single tactics against the current formula.

use thiserror::Error;

use super::calc::StepJustification;
use crate::knowledge::{KnowledgeStore, Tactic};
use crate::par::Exec;
use crate::rewrite::{
    apply_rule, eval_exact, eval_f64_env, in_interval, normalize_traced, poly_degree, reduce, substitute,
    CancelToken, Env, Interval, NormalizeError, NotApplicable, Substitution, Truth, DEFAULT_FUEL,
};
use crate::term::{exact_sqrt, is_pattern_var, Number, Term};

/// Sample points of the sign-change scan in numeric root finding.
pub const SCAN_POINTS: usize = 4096;
/// Width at which bisection stops.
pub const ROOT_TOLERANCE: f64 = 1e-9;
/// Digits of numeric roots found before switching to floats.
const EXACT_MODE_DIGITS: u8 = 6;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TacticError {
    #[error("there is no current formula")]
    NoCurrent,
    #[error("`{0}` is not an equation")]
    NotAnEquation(Term),
    #[error("`{0}` is not a list")]
    NotAList(Term),
    #[error("`{0}` is not a variable")]
    NotAVariable(Term),
    #[error("`{var}` does not occur in `{formula}`")]
    DoesNotOccur { var: String, formula: Term },
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("unknown rule set `{0}`")]
    UnknownRuleSet(String),
    #[error(transparent)]
    NotApplicable(#[from] NotApplicable),
    #[error("nothing to simplify")]
    NoProgress,
    #[error("cannot solve `{equation}` for {unknown}")]
    Unsolvable { equation: Term, unknown: String },
    #[error("{0}")]
    Template(String),
    #[error("rewriting did not terminate: {0}")]
    Normalize(String),
    #[error("cancelled")]
    Cancelled,
    #[error("a sub-problem cannot be run as a single step")]
    SubProblem,
}

impl From<NormalizeError> for TacticError {
    fn from(e: NormalizeError) -> Self {
        match e {
            NormalizeError::Cancelled { .. } => TacticError::Cancelled,
            other => TacticError::Normalize(other.to_string()),
        }
    }
}

/// What a tactic runs against.
#[derive(Clone, Copy)]
pub struct Ctx<'a> {
    pub store: &'a KnowledgeStore,
    pub theory: &'a str,
    /// Program bindings (`?`-names) and known constants (`r = 7`).
    pub env: &'a Env,
    /// Digits once floating-point mode is on.
    pub float: Option<u8>,
    pub exec: Exec,
    pub cancel: Option<&'a CancelToken>,
}

/// Formulas produced by a tactic. `sub` holds the detailed derivation
/// (shown nested), `steps` are shown at the current level before `formula`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub sub: Option<SubDerivation>,
    pub steps: Vec<(Term, StepJustification)>,
    pub formula: Term,
    pub justification: StepJustification,
    /// The term a program binds with `bind`.
    pub value: Term,
    pub float: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubDerivation {
    pub label: String,
    pub collapsed: bool,
    pub formulas: Vec<(Term, Option<StepJustification>)>,
}

impl Outcome {
    fn simple(formula: Term, tactic: &Tactic) -> Self {
        Outcome {
            sub: None,
            steps: Vec::new(),
            value: formula.clone(),
            formula,
            justification: StepJustification::tactic(tactic),
            float: None,
        }
    }

    /// Every formula the step appends, in order.
    pub fn all_formulas(&self) -> Vec<&Term> {
        let mut out: Vec<&Term> = Vec::new();
        if let Some(s) = &self.sub {
            out.extend(s.formulas.iter().map(|(t, _)| t));
        }
        out.extend(self.steps.iter().map(|(t, _)| t));
        out.push(&self.formula);
        out
    }
}

/// Substitutes `?`-bindings of `env` into a template and reduces built-ins.
pub fn instantiate(t: &Term, env: &Env) -> Result<Term, String> {
    let metas: Substitution = env.iter().filter(|(k, _)| is_pattern_var(k)).map(|(k, v)| (k.clone(), v.clone())).collect();
    let t = substitute(&metas, t);
    let leftover: Vec<String> = t.pattern_vars().into_iter().collect();
    if !leftover.is_empty() {
        return Err(format!("unbound {} in `{t}`", leftover.join(", ")));
    }
    reduce(&t, env)
}

/// Runs an instantiated tactic.
pub fn run_tactic(ctx: &Ctx, tactic: &Tactic, current: Option<&Term>) -> Result<Outcome, TacticError> {
    let current_eq = || -> Result<(&Term, &Term, &Term), TacticError> {
        let c = current.ok_or(TacticError::NoCurrent)?;
        let (l, r) = c.as_equation().ok_or_else(|| TacticError::NotAnEquation(c.clone()))?;
        Ok((c, l, r))
    };
    match tactic {
        Tactic::Rewrite { rule, path } => {
            let c = current.ok_or(TacticError::NoCurrent)?;
            let r = ctx.store.rule(ctx.theory, rule).ok_or_else(|| TacticError::UnknownRule(rule.clone()))?;
            let (out, j) = apply_rule(r, c, path, ctx.env)?;
            Ok(Outcome { justification: StepJustification::Rule(j), ..Outcome::simple(out, tactic) })
        }
        Tactic::Simplify { ruleset } => {
            let c = current.ok_or(TacticError::NoCurrent)?;
            let set = ctx.store.ruleset(ctx.theory, ruleset).ok_or_else(|| TacticError::UnknownRuleSet(ruleset.clone()))?;
            let (_, steps) = normalize_traced(set, c, ctx.env, DEFAULT_FUEL, ctx.cancel)?;
            let mut steps: Vec<(Term, StepJustification)> =
                steps.into_iter().map(|s| (s.term, StepJustification::Rule(s.justification))).collect();
            let (formula, justification) = steps.pop().ok_or(TacticError::NoProgress)?;
            Ok(Outcome { steps, value: formula.clone(), formula, justification, sub: None, float: None })
        }
        Tactic::Substitute { equation, function_of } => {
            let (_, l, r) = current_eq()?;
            let (x, e) = equation.as_equation().ok_or_else(|| TacticError::NotAnEquation(equation.clone()))?;
            let x = x.as_var().ok_or_else(|| TacticError::NotAVariable(x.clone()))?;
            if !r.occurs_free(x) {
                return Err(TacticError::DoesNotOccur { var: x.to_string(), formula: current.unwrap().clone() });
            }
            let mut s = Substitution::new();
            s.insert(x, e.clone());
            let mut rhs = substitute(&s, r);
            if let Some(digits) = ctx.float {
                if let Some(v) = eval_f64_env(&rhs, ctx.env) {
                    rhs = Term::Number(Number::float(v, digits));
                }
            }
            let lhs = match function_of {
                Some(y) if l.as_var().is_some() => Term::binary("app", l.clone(), y.clone()),
                _ => l.clone(),
            };
            Ok(Outcome::simple(Term::eq(lhs, rhs), tactic))
        }
        Tactic::TakeEquation { list, index } => {
            let items = list.as_list().ok_or_else(|| TacticError::NotAList(list.clone()))?;
            let eq = items.get(*index).ok_or_else(|| TacticError::Template(format!("no equation {index} in `{list}`")))?;
            Ok(Outcome::simple(eq.clone(), tactic))
        }
        Tactic::SwitchToFloat { digits } => {
            let c = current.ok_or(TacticError::NoCurrent)?;
            Ok(Outcome { float: Some(*digits), ..Outcome::simple(c.clone(), tactic) })
        }
        Tactic::FilterByInterval { list, interval } => {
            let items = list.as_list().ok_or_else(|| TacticError::NotAList(list.clone()))?;
            let iv = Interval::from_term(interval).map_err(|e| TacticError::Template(e.0))?;
            let kept: Vec<Term> = items
                .iter()
                .filter(|eq| {
                    let value = eq.as_equation().map_or(*eq, |(_, r)| r);
                    in_interval(value, &iv, ctx.env) != Truth::False
                })
                .cloned()
                .collect();
            let kept = Term::list(kept);
            Ok(Outcome { value: kept.clone(), ..Outcome::simple(named_list(kept), tactic) })
        }
        Tactic::SolveUnivariate { equation, unknown, within } => {
            let x = unknown.as_var().ok_or_else(|| TacticError::NotAVariable(unknown.clone()))?;
            if equation.as_equation().is_none() {
                return Err(TacticError::NotAnEquation(equation.clone()));
            }
            if within.is_some() || ctx.float.is_some() {
                let roots = solve_numeric(ctx, equation, x, within.as_ref())?;
                return Ok(Outcome { value: roots.clone(), ..Outcome::simple(named_list(roots), tactic) });
            }
            let (formulas, solutions) = solve_symbolic(ctx, equation, x)?;
            Ok(Outcome {
                sub: Some(SubDerivation { label: tactic.to_string(), collapsed: true, formulas }),
                value: solutions.clone(),
                ..Outcome::simple(named_list(solutions), tactic)
            })
        }
        Tactic::Differentiate { function, variable } => differentiate(ctx, tactic, function, variable),
        Tactic::SubProblem { .. } => Err(TacticError::SubProblem),
    }
}

/// `L = [...]`, the display form of a solution list.
fn named_list(list: Term) -> Term {
    Term::eq(Term::var("L"), list)
}

fn differentiate(ctx: &Ctx, tactic: &Tactic, function: &Term, variable: &Term) -> Result<Outcome, TacticError> {
    let x = variable.as_var().ok_or_else(|| TacticError::NotAVariable(variable.clone()))?;
    let (l, r) = function.as_equation().ok_or_else(|| TacticError::NotAnEquation(function.clone()))?;
    let lhs = match l {
        Term::Variable(f) => Term::var(format!("{f}'")),
        Term::Apply(op, a) if op.as_str() == "app" && a.len() == 2 => match &a[0] {
            Term::Variable(f) => Term::binary("app", Term::var(format!("{f}'")), a[1].clone()),
            _ => return Err(TacticError::NotAVariable(a[0].clone())),
        },
        other => return Err(TacticError::NotAVariable(other.clone())),
    };
    let start = Term::eq(lhs, Term::binder(crate::term::BinderKind::Deriv, x, r.clone()));
    let mut formulas: Vec<(Term, Option<StepJustification>)> = vec![(start.clone(), Some(StepJustification::tactic(tactic)))];
    let mut cur = start;
    for set in ["diff", "simplify"] {
        let rs = ctx.store.ruleset(ctx.theory, set).ok_or_else(|| TacticError::UnknownRuleSet(set.into()))?;
        let (out, steps) = normalize_traced(rs, &cur, ctx.env, DEFAULT_FUEL, ctx.cancel)?;
        formulas.extend(steps.into_iter().map(|s| (s.term, Some(StepJustification::Rule(s.justification)))));
        cur = out;
    }
    let (formula, justification) = formulas.pop().expect("start formula");
    let justification = justification.expect("every step is justified");
    let sub = (!formulas.is_empty()).then(|| SubDerivation { label: tactic.to_string(), collapsed: false, formulas });
    Ok(Outcome { sub, steps: Vec::new(), value: formula.clone(), formula, justification, float: None })
}

fn is_solved_for(t: &Term, x: &str) -> bool {
    t.as_equation().is_some_and(|(l, r)| l.as_var() == Some(x) && !r.occurs_free(x))
}

/// Isolation by rewriting, with the quadratic formula as fallback.
/// Returns the derivation (starting with the equation) and the solutions.
fn solve_symbolic(ctx: &Ctx, eq: &Term, x: &str) -> Result<(Vec<(Term, Option<StepJustification>)>, Term), TacticError> {
    let mut env = ctx.env.clone();
    env.insert("?x".into(), Term::var(x));
    let mut formulas: Vec<(Term, Option<StepJustification>)> = vec![(eq.clone(), None)];
    let mut cur = eq.clone();
    for set in ["isolate", "simplify"] {
        let Some(rs) = ctx.store.ruleset(ctx.theory, set) else { continue };
        let (out, steps) = normalize_traced(rs, &cur, &env, DEFAULT_FUEL, ctx.cancel)?;
        formulas.extend(steps.into_iter().map(|s| (s.term, Some(StepJustification::Rule(s.justification)))));
        cur = out;
    }
    let solutions = match cur.as_list() {
        Some(items) if items.iter().all(|i| is_solved_for(i, x)) => Some(cur.clone()),
        None if is_solved_for(&cur, x) => Some(Term::list(vec![cur.clone()])),
        _ => None,
    };
    if let Some(s) = solutions {
        return Ok((formulas, s));
    }
    let roots = polynomial_roots(eq, x, ctx.env).ok_or_else(|| TacticError::Unsolvable { equation: eq.clone(), unknown: x.into() })?;
    Ok((vec![(eq.clone(), None)], roots))
}

/// Roots of a linear or quadratic equation whose coefficients evaluate
/// exactly under `env`; irrational roots stay as `sqrt` terms.
fn polynomial_roots(eq: &Term, x: &str, env: &Env) -> Option<Term> {
    let degree = poly_degree(eq, x)?;
    if !(1..=2).contains(&degree) {
        return None;
    }
    let (l, r) = eq.as_equation()?;
    let p = Term::binary("minus", l.clone(), r.clone());
    let at = |v: i64| {
        let mut e = env.clone();
        e.insert(x.to_string(), Term::int(v));
        eval_exact(&p, &e)
    };
    let (p0, p1, pm1) = (at(0)?, at(1)?, at(-1)?);
    let two = num_rational::BigRational::from_integer(2.into());
    let a = (&p1 + &pm1 - &p0 - &p0) / &two;
    let b = (&p1 - &pm1) / &two;
    let c = p0;
    let num = |q: num_rational::BigRational| Term::Number(Number::Exact(q));
    let sol = |v: Term| Term::eq(Term::var(x), v);
    use num_traits::{Signed, Zero};
    if a.is_zero() {
        if b.is_zero() {
            return None;
        }
        return Some(Term::list(vec![sol(num(-c / b))]));
    }
    let disc = &b * &b - num_rational::BigRational::from_integer(4.into()) * &a * &c;
    if disc.is_negative() {
        return Some(Term::list(Vec::new()));
    }
    let denom = &two * &a;
    if let Some(s) = exact_sqrt(&disc) {
        let mut roots = vec![(-&b - &s) / &denom, (-&b + &s) / &denom];
        roots.sort();
        roots.dedup();
        return Some(Term::list(roots.into_iter().map(|q| sol(num(q))).collect()));
    }
    let sq = Term::unary("sqrt", num(disc));
    let mk = |op: &str| sol(Term::binary("div", Term::binary(op, num(-b.clone()), sq.clone()), num(denom.clone())));
    Some(Term::list(vec![mk("minus"), mk("plus")]))
}

/// Zeros of `lhs - rhs` in `within` (or a default window) by a sign-change
/// scan followed by bisection. Results are float equations `x = value`.
fn solve_numeric(ctx: &Ctx, eq: &Term, x: &str, within: Option<&Term>) -> Result<Term, TacticError> {
    let (l, r) = eq.as_equation().ok_or_else(|| TacticError::NotAnEquation(eq.clone()))?;
    let f_term = Term::binary("minus", l.clone(), r.clone());
    let (lo, hi) = match within {
        Some(w) => {
            let iv = Interval::from_term(w).map_err(|e| TacticError::Template(e.0))?;
            let lo = eval_f64_env(&iv.lower, ctx.env).ok_or_else(|| TacticError::Template(format!("bound `{}` is not numeric", iv.lower)))?;
            let hi = eval_f64_env(&iv.upper, ctx.env).ok_or_else(|| TacticError::Template(format!("bound `{}` is not numeric", iv.upper)))?;
            (lo, hi)
        }
        None => (-1e3, 1e3),
    };
    let roots = find_roots(ctx.exec, &f_term, x, ctx.env, lo, hi);
    let digits = ctx.float.unwrap_or(EXACT_MODE_DIGITS);
    Ok(Term::list(roots.into_iter().map(|v| Term::eq(Term::var(x), Term::Number(Number::float(v, digits)))).collect()))
}

/// Roots of `f` (a term in `x`) strictly inside `(lo, hi)`.
pub fn find_roots(exec: Exec, f: &Term, x: &str, env: &Env, lo: f64, hi: f64) -> Vec<f64> {
    if !(lo < hi) {
        return Vec::new();
    }
    let eval = |v: f64| -> Option<f64> {
        let mut e = env.clone();
        e.insert(x.to_string(), Term::Number(Number::float(v, 17)));
        eval_f64_env(f, &e)
    };
    let n = SCAN_POINTS;
    let h = (hi - lo) / n as f64;
    // open interval: sample strictly inside
    let xs: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).map(|v| v.clamp(lo + h * 1e-6, hi - h * 1e-6)).collect();
    let ys: Vec<Option<f64>> = exec.map(&xs, |&v| eval(v));
    let scale = ys.iter().flatten().fold(1.0f64, |m, y| m.max(y.abs()));
    let mut roots = Vec::new();
    for i in 0..n {
        let (Some(ya), Some(yb)) = (ys[i], ys[i + 1]) else { continue };
        if ya == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if ya.signum() == yb.signum() || yb == 0.0 {
            continue;
        }
        let (mut a, mut b, mut fa) = (xs[i], xs[i + 1], ya);
        while b - a > ROOT_TOLERANCE {
            let m = 0.5 * (a + b);
            let Some(fm) = eval(m) else { break };
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        let root = 0.5 * (a + b);
        // a sign change across a pole is not a root
        if eval(root).is_some_and(|v| v.abs() <= 1e-6 * scale) {
            roots.push(root);
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 10.0 * ROOT_TOLERANCE);
    roots
}
