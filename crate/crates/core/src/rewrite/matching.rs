use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::term::{is_pattern_var, Term};

/// Bindings from pattern variables (`?a`) to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Substitution(BTreeMap<String, Term>);

impl Substitution {
    pub fn new() -> Self {
        Substitution(BTreeMap::new())
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    /// Adds a binding; returns false (and leaves the map unchanged) when
    /// `var` is already bound to a different term.
    pub fn bind(&mut self, var: impl Into<String>, t: Term) -> bool {
        let var = var.into();
        match self.0.get(&var) {
            Some(old) => *old == t,
            None => {
                self.0.insert(var, t);
                true
            }
        }
    }

    pub fn insert(&mut self, var: impl Into<String>, t: Term) {
        self.0.insert(var.into(), t);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_map(&self) -> &BTreeMap<String, Term> {
        &self.0
    }

    pub fn apply(&self, t: &Term) -> Term {
        substitute(self, t)
    }
}

impl FromIterator<(String, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

impl From<BTreeMap<String, Term>> for Substitution {
    fn from(m: BTreeMap<String, Term>) -> Self {
        Substitution(m)
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k} := {v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// First-order syntactic matching. Pattern variables are free `?`-names;
/// a binder named `?x` matches any binder of the same kind and binds `?x`
/// to the target's bound variable.
pub fn match_term(pattern: &Term, target: &Term) -> Option<Substitution> {
    let mut s = Substitution::new();
    match_into(pattern, target, &mut s).then_some(s)
}

/// Extends `s` in place; on failure `s` may hold partial bindings.
pub fn match_into(pattern: &Term, target: &Term, s: &mut Substitution) -> bool {
    go(pattern, target, &mut Vec::new(), s)
}

fn go<'a>(p: &'a Term, t: &'a Term, bound: &mut Vec<(&'a str, &'a str)>, s: &mut Substitution) -> bool {
    match (p, t) {
        (Term::Variable(pv), _) => {
            if let Some(i) = bound.iter().rposition(|(l, _)| *l == pv.as_str()) {
                return matches!(t, Term::Variable(tv) if bound.iter().rposition(|(_, r)| *r == tv.as_str()) == Some(i));
            }
            if is_pattern_var(pv) {
                return s.bind(pv.clone(), t.clone());
            }
            // a plain free variable in a pattern matches only itself, and
            // only when the target occurrence is free as well
            matches!(t, Term::Variable(tv) if tv == pv && !bound.iter().any(|(_, r)| *r == tv.as_str()))
        }
        (Term::Number(a), Term::Number(b)) => a == b,
        (Term::Constant(a), Term::Constant(b)) => a == b,
        (Term::Apply(o1, a1), Term::Apply(o2, a2)) => {
            o1 == o2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| go(x, y, bound, s))
        }
        (Term::Binder(k1, n1, b1), Term::Binder(k2, n2, b2)) => {
            if k1 != k2 {
                return false;
            }
            if is_pattern_var(n1) && !s.bind(n1.clone(), Term::var(n2.clone())) {
                return false;
            }
            bound.push((n1.as_str(), n2.as_str()));
            let ok = go(b1, b2, bound, s);
            bound.pop();
            ok
        }
        _ => false,
    }
}

/// Replaces bound pattern variables. Binders named by a pattern variable
/// take the bound variable's name (capture intended, as in rule right-hand
/// sides like `d/d?x ?u`); plain binders shield their name and are renamed
/// when an inserted term would otherwise be captured.
pub fn substitute(s: &Substitution, t: &Term) -> Term {
    if s.is_empty() {
        return t.clone();
    }
    subst(s, t, &[])
}

fn subst(s: &Substitution, t: &Term, shielded: &[String]) -> Term {
    match t {
        Term::Variable(v) => {
            if shielded.contains(v) {
                return t.clone();
            }
            s.get(v).cloned().unwrap_or_else(|| t.clone())
        }
        Term::Number(_) | Term::Constant(_) => t.clone(),
        Term::Apply(op, args) => Term::Apply(op.clone(), args.iter().map(|a| subst(s, a, shielded)).collect()),
        Term::Binder(kind, name, body) => {
            if is_pattern_var(name) {
                if let Some(Term::Variable(new)) = s.get(name) {
                    // inner occurrences of `?x` become the new bound name
                    return Term::binder(*kind, new.clone(), subst(s, body, shielded));
                }
            }
            let mut inner = shielded.to_vec();
            inner.push(name.clone());
            // would an inserted term capture `name`?
            let inserted_free = body
                .free_vars()
                .iter()
                .filter(|v| !inner.contains(v))
                .filter_map(|v| s.get(v))
                .any(|r| r.occurs_free(name));
            if inserted_free {
                let fresh = fresh_name(name, &[body.as_ref()], s);
                let renamed = rename_free(body, name, &fresh);
                let mut inner2 = shielded.to_vec();
                inner2.push(fresh.clone());
                Term::binder(*kind, fresh, subst(s, &renamed, &inner2))
            } else {
                Term::binder(*kind, name.clone(), subst(s, body, &inner))
            }
        }
    }
}

fn fresh_name(base: &str, avoid: &[&Term], s: &Substitution) -> String {
    (1..)
        .map(|i| format!("{base}{}", "'".repeat(i)))
        .find(|c| !avoid.iter().any(|t| t.occurs_free(c)) && !s.iter().any(|(k, v)| k == c || v.occurs_free(c)))
        .expect("infinite supply of names")
}

/// Renames free occurrences of `from` to `to`.
pub fn rename_free(t: &Term, from: &str, to: &str) -> Term {
    match t {
        Term::Variable(v) if v == from => Term::var(to),
        Term::Apply(op, args) => Term::Apply(op.clone(), args.iter().map(|a| rename_free(a, from, to)).collect()),
        Term::Binder(k, n, body) if n != from => Term::binder(*k, n.clone(), rename_free(body, from, to)),
        _ => t.clone(),
    }
}

/// Renames pattern variables of `t` apart from every name in `avoid`.
pub fn rename_apart(t: &Term, avoid: &std::collections::BTreeSet<String>) -> (Term, Substitution) {
    let mut s = Substitution::new();
    for v in t.pattern_vars() {
        if avoid.contains(&v) {
            let fresh = (1..).map(|i| format!("{v}_{i}")).find(|c| !avoid.contains(c)).unwrap();
            s.insert(v.clone(), Term::var(fresh));
        }
    }
    (substitute(&s, t), s)
}
