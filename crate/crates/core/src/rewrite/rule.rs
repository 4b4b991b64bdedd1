use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::builtins::reduce;
use super::eval::Env;
use super::matching::{match_term, substitute, Substitution};
use super::pred::{eval_pred, Truth};
use crate::term::{replace_at, subterm, Path, Term};

/// A named, possibly conditional, rewrite rule `lhs = rhs`.
///
/// `context` lists pattern variables supplied by the caller rather than
/// bound by matching (e.g. the unknown `?x` while isolating it).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRule {
    pub name: String,
    pub lhs: Term,
    pub rhs: Term,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<Term>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub context: Vec<String>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule `{rule}`: pattern variable {var} is not bound by the left-hand side")]
    UnboundVar { rule: String, var: String },
    #[error("rule `{rule}`: left-hand side is a bare pattern variable")]
    TrivialLhs { rule: String },
    #[error("rule set `{set}`: duplicate rule name `{rule}`")]
    Duplicate { set: String, rule: String },
}

impl RewriteRule {
    pub fn new(name: impl Into<String>, lhs: Term, rhs: Term) -> Self {
        RewriteRule { name: name.into(), lhs, rhs, conditions: Vec::new(), context: Vec::new() }
    }

    pub fn when(mut self, cond: Term) -> Self {
        self.conditions.push(cond);
        self
    }

    pub fn in_context(mut self, var: &str) -> Self {
        self.context.push(var.to_string());
        self
    }

    /// Every pattern variable of rhs and conditions occurs in lhs or is a
    /// context variable.
    pub fn validate(&self) -> Result<(), RuleError> {
        if matches!(&self.lhs, Term::Variable(_)) {
            return Err(RuleError::TrivialLhs { rule: self.name.clone() });
        }
        let mut known: BTreeSet<String> = self.lhs.pattern_vars();
        known.extend(self.context.iter().cloned());
        for t in std::iter::once(&self.rhs).chain(&self.conditions) {
            if let Some(var) = t.pattern_vars().into_iter().find(|v| !known.contains(v)) {
                return Err(RuleError::UnboundVar { rule: self.name.clone(), var });
            }
        }
        Ok(())
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)?;
        if !self.conditions.is_empty() {
            let cs: Vec<String> = self.conditions.iter().map(Term::to_string).collect();
            write!(f, " if {}", cs.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Rules in declaration order; each at its first (preorder) position.
    #[default]
    FirstMatch,
    /// Leftmost-innermost position first, then rule order.
    Innermost,
    /// Leftmost-outermost position first, then rule order.
    Outermost,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub name: String,
    pub rules: Vec<RewriteRule>,
    #[serde(default)]
    pub strategy: Strategy,
}

impl RuleSet {
    pub fn new(name: impl Into<String>, strategy: Strategy, rules: Vec<RewriteRule>) -> Result<Self, RuleError> {
        let set = RuleSet { name: name.into(), rules, strategy };
        set.validate()?;
        Ok(set)
    }

    pub fn empty(name: impl Into<String>) -> Self {
        RuleSet { name: name.into(), rules: Vec::new(), strategy: Strategy::FirstMatch }
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        let mut seen = BTreeSet::new();
        for r in &self.rules {
            if !seen.insert(&r.name) {
                return Err(RuleError::Duplicate { set: self.name.clone(), rule: r.name.clone() });
            }
            r.validate()?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&RewriteRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Concatenates sets in order; later duplicates of a name are dropped.
    pub fn union<'a>(name: &str, strategy: Strategy, sets: impl IntoIterator<Item = &'a RuleSet>) -> RuleSet {
        let mut rules: Vec<RewriteRule> = Vec::new();
        for s in sets {
            for r in &s.rules {
                if !rules.iter().any(|x| x.name == r.name) {
                    rules.push(r.clone());
                }
            }
        }
        RuleSet { name: name.to_string(), rules, strategy }
    }
}

/// Why a step is justified: which rule, where, with which bindings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Justification {
    pub rule: String,
    pub path: Path,
    pub bindings: Substitution,
}

impl fmt::Display for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {} with {}", self.rule, self.path, self.bindings)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum NotApplicable {
    #[error("no sub-term at {path}")]
    InvalidPath { path: Path },
    #[error("left-hand side does not match")]
    NoMatch,
    #[error("condition {condition} is false")]
    ConditionFalse { condition: Term },
    #[error("condition {condition} is undecided")]
    ConditionUndecided { condition: Term },
    #[error("context variable {var} is not supplied")]
    MissingContext { var: String },
    #[error("right-hand side cannot be computed: {message}")]
    Irreducible { message: String },
}

/// Applies `rule` at `at`. `context` supplies context pattern variables
/// and values for condition evaluation.
pub fn apply_rule(rule: &RewriteRule, t: &Term, at: &Path, context: &Env) -> Result<(Term, Justification), NotApplicable> {
    let target = subterm(t, at).map_err(|_| NotApplicable::InvalidPath { path: at.clone() })?;
    let mut s = match_term(&rule.lhs, target).ok_or(NotApplicable::NoMatch)?;
    for var in &rule.context {
        let v = context.get(var).ok_or_else(|| NotApplicable::MissingContext { var: var.clone() })?;
        if !s.bind(var.clone(), v.clone()) {
            return Err(NotApplicable::NoMatch);
        }
    }
    if !rule.conditions.is_empty() {
        let mut env = context.clone();
        env.extend(s.iter().map(|(k, v)| (k.clone(), v.clone())));
        for c in &rule.conditions {
            match eval_pred(c, &env) {
                Truth::True => {}
                Truth::False => return Err(NotApplicable::ConditionFalse { condition: c.clone() }),
                Truth::Undecided => return Err(NotApplicable::ConditionUndecided { condition: c.clone() }),
            }
        }
    }
    let result = instantiate(rule, t, at, &s)?;
    Ok((result, Justification { rule: rule.name.clone(), path: at.clone(), bindings: s }))
}

fn instantiate(rule: &RewriteRule, t: &Term, at: &Path, s: &Substitution) -> Result<Term, NotApplicable> {
    let rhs = reduce(&substitute(s, &rule.rhs), &Env::new()).map_err(|message| NotApplicable::Irreducible { message })?;
    replace_at(t, at, rhs).map_err(|_| NotApplicable::InvalidPath { path: at.clone() })
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("recorded bindings do not match the sub-term at {0}")]
    BindingMismatch(Path),
    #[error(transparent)]
    NotApplicable(#[from] NotApplicable),
}

/// Re-derives a step from its justification alone.
pub fn replay(rule: &RewriteRule, before: &Term, j: &Justification) -> Result<Term, ReplayError> {
    if rule.name != j.rule {
        return Err(ReplayError::UnknownRule(j.rule.clone()));
    }
    let target = subterm(before, &j.path).map_err(|_| NotApplicable::InvalidPath { path: j.path.clone() })?;
    if substitute(&j.bindings, &rule.lhs) != *target {
        return Err(ReplayError::BindingMismatch(j.path.clone()));
    }
    Ok(instantiate(rule, before, &j.path, &j.bindings)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{parse, Signature};

    fn t(s: &str) -> Term {
        parse(s, &Signature::full()).unwrap()
    }

    fn diff_diff() -> RewriteRule {
        RewriteRule::new("diff_diff", t("d/d?x(?u_1 - ?u_2)"), t("d/d?x ?u_1 - d/d?x ?u_2"))
    }

    #[test]
    fn difference_rule_on_line_13() {
        let line13 = t("A'(u) = d/du(2*u*sqrt(r^2-(u/2)^2) - u^2)");
        let (out, j) = apply_rule(&diff_diff(), &line13, &Path(vec![1]), &Env::new()).unwrap();
        assert_eq!(out, t("A'(u) = d/du(2*u*sqrt(r^2-(u/2)^2)) - d/du(u^2)"));
        assert_eq!(j.rule, "diff_diff");
        assert_eq!(replay(&diff_diff(), &line13, &j).unwrap(), out);
    }

    #[test]
    fn literal_rule_gives_rhs_verbatim() {
        let r = RewriteRule::new("one", t("1+1"), t("2"));
        let (out, _) = apply_rule(&r, &t("x*(1+1)"), &Path(vec![1]), &Env::new()).unwrap();
        assert_eq!(out, t("x*2"));
    }

    #[test]
    fn guard_blocks() {
        let r = RewriteRule::new("div_self", t("?a/?a"), Term::int(1)).when(t("?a ~= 0"));
        let ctx: Env = [("a".to_string(), Term::int(0))].into();
        assert!(matches!(
            apply_rule(&r, &t("a/a"), &Path::root(), &ctx),
            Err(NotApplicable::ConditionFalse { .. })
        ));
        assert!(matches!(
            apply_rule(&r, &t("a/a"), &Path::root(), &Env::new()),
            Err(NotApplicable::ConditionUndecided { .. })
        ));
        assert_eq!(apply_rule(&r, &t("a/b"), &Path::root(), &Env::new()).unwrap_err(), NotApplicable::NoMatch);
    }

    #[test]
    fn validation_catches_unbound_rhs_var() {
        let r = RewriteRule::new("bad", t("?a + 0"), t("?b"));
        assert!(matches!(r.validate(), Err(RuleError::UnboundVar { .. })));
        assert!(r.clone().in_context("?b").validate().is_ok());
    }
}
