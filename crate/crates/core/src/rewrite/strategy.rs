use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use super::eval::Env;
use super::rule::{apply_rule, Justification, RewriteRule, RuleSet, Strategy};
use crate::term::{all_paths, subterm, Path, Term};

/// Default rewrite budget for [`normalize`].
pub const DEFAULT_FUEL: usize = 10_000;

/// Cooperative cancellation, checked between rewrite steps.
#[derive(Clone, Debug, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

/// One rewrite with its result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub term: Term,
    pub justification: Justification,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("rewrite budget exhausted after {} steps", steps.len())]
    FuelExhausted { partial: Term, steps: Vec<Step> },
    #[error("cancelled")]
    Cancelled { partial: Term },
}

/// Can `rule` possibly match `t`? Cheap head-symbol filter.
fn head_compatible(rule: &RewriteRule, t: &Term) -> bool {
    match (&rule.lhs, t) {
        (Term::Apply(o1, a1), Term::Apply(o2, a2)) => o1 == o2 && a1.len() == a2.len(),
        (Term::Binder(k1, ..), Term::Binder(k2, ..)) => k1 == k2,
        (Term::Apply(..), _) | (Term::Binder(..), _) => false,
        _ => true,
    }
}

fn postorder(t: &Term) -> Vec<Path> {
    let mut out = Vec::new();
    fn go(t: &Term, cur: &mut Vec<usize>, out: &mut Vec<Path>) {
        for i in 0..t.child_count() {
            cur.push(i);
            go(t.child(i).unwrap(), cur, out);
            cur.pop();
        }
        out.push(Path(cur.clone()));
    }
    go(t, &mut Vec::new(), &mut out);
    out
}

fn try_at(rule: &RewriteRule, t: &Term, p: &Path, ctx: &Env) -> Option<(Term, Justification)> {
    let sub = subterm(t, p).ok()?;
    if !head_compatible(rule, sub) {
        return None;
    }
    apply_rule(rule, t, p, ctx).ok()
}

/// A single rewrite step per the set's strategy, or `None` at a fixpoint.
pub fn rewrite_once(set: &RuleSet, t: &Term, ctx: &Env) -> Option<(Term, Justification)> {
    match set.strategy {
        Strategy::FirstMatch => {
            let paths = all_paths(t);
            set.rules.iter().find_map(|r| paths.iter().find_map(|p| try_at(r, t, p, ctx)))
        }
        Strategy::Outermost => all_paths(t).iter().find_map(|p| set.rules.iter().find_map(|r| try_at(r, t, p, ctx))),
        Strategy::Innermost => postorder(t).iter().find_map(|p| set.rules.iter().find_map(|r| try_at(r, t, p, ctx))),
    }
}

/// Rewrites to a fixpoint, recording every step.
pub fn normalize_traced(
    set: &RuleSet,
    t: &Term,
    ctx: &Env,
    fuel: usize,
    cancel: Option<&CancelToken>,
) -> Result<(Term, Vec<Step>), NormalizeError> {
    let mut cur = t.clone();
    let mut steps = Vec::new();
    loop {
        if cancel.is_some_and(CancelToken::is_cancelled) {
            return Err(NormalizeError::Cancelled { partial: cur });
        }
        let Some((next, j)) = rewrite_once(set, &cur, ctx) else {
            return Ok((cur, steps));
        };
        if steps.len() == fuel {
            return Err(NormalizeError::FuelExhausted { partial: cur, steps });
        }
        steps.push(Step { term: next.clone(), justification: j });
        cur = next;
    }
}

/// Rewrites to a fixpoint with an empty context.
pub fn normalize(set: &RuleSet, t: &Term, fuel: usize) -> Result<Term, NormalizeError> {
    normalize_traced(set, t, &Env::new(), fuel, None).map(|(t, _)| t)
}
