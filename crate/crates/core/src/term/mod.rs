//! Symbolic terms: the tree representation every other module works on.
//!
//! Terms are immutable values. Equality and hashing are up to
//! alpha-equivalence: binder-bound names may be renamed consistently
//! without changing the term.

mod lexer;
mod nav;
mod notation;
mod number;
mod outline;
mod parser;
mod pretty;
mod render;
mod signature;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

pub use nav::{all_paths, navigate, replace_at, subterm, Cursor, Move, Moved, Path, PathError};
pub use notation::{Assoc, Fixity, NotationEntry, NotationError, NotationTable};
pub use number::{exact_sqrt, Number};
pub use outline::{outline, OutlineNode};
pub use parser::{parse, ParseError};
pub use pretty::{render_pretty, render_pretty_at};
pub use render::{render_linear, RenderError};
pub use signature::{Arity, OpDecl, OpKind, Signature};


/// Operator identifier, e.g. `plus`, `sqrt`, `eq`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpId(String);

impl OpId {
    pub fn new(name: impl Into<String>) -> Self {
        OpId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for OpId {
    fn from(s: &str) -> Self {
        OpId(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinderKind {
    Forall,
    Lambda,
    Deriv,
}

impl BinderKind {
    pub fn op_name(self) -> &'static str {
        match self {
            BinderKind::Forall => "forall",
            BinderKind::Lambda => "lambda",
            BinderKind::Deriv => "deriv",
        }
    }

    pub fn from_op(name: &str) -> Option<Self> {
        match name {
            "forall" => Some(BinderKind::Forall),
            "lambda" => Some(BinderKind::Lambda),
            "deriv" => Some(BinderKind::Deriv),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Term {
    Number(Number),
    Variable(String),
    Constant(String),
    Apply(OpId, Vec<Term>),
    Binder(BinderKind, String, Box<Term>),
}

/// Pattern variables are ordinary variables whose name starts with `?`.
pub fn is_pattern_var(name: &str) -> bool {
    name.starts_with('?')
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Variable(name.into())
    }

    pub fn int(n: i64) -> Term {
        Term::Number(Number::int(n))
    }

    pub fn num(n: Number) -> Term {
        Term::Number(n)
    }

    pub fn constant(name: impl Into<String>) -> Term {
        Term::Constant(name.into())
    }

    pub fn apply(op: impl Into<OpId>, args: Vec<Term>) -> Term {
        Term::Apply(op.into(), args)
    }

    pub fn binary(op: &str, a: Term, b: Term) -> Term {
        Term::Apply(OpId::new(op), vec![a, b])
    }

    pub fn unary(op: &str, a: Term) -> Term {
        Term::Apply(OpId::new(op), vec![a])
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::binary("eq", a, b)
    }

    pub fn list(items: Vec<Term>) -> Term {
        Term::Apply(OpId::new("list"), items)
    }

    pub fn binder(kind: BinderKind, bound: impl Into<String>, body: Term) -> Term {
        Term::Binder(kind, bound.into(), Box::new(body))
    }

    pub fn op(&self) -> Option<&str> {
        match self {
            Term::Apply(op, _) => Some(op.as_str()),
            _ => None,
        }
    }

    pub fn is_op(&self, name: &str) -> bool {
        self.op() == Some(name)
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Apply(_, args) => args,
            _ => &[],
        }
    }

    pub fn as_number(&self) -> Option<&Number> {
        match self {
            Term::Number(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Variable(v) => Some(v),
            _ => None,
        }
    }

    /// `(lhs, rhs)` of an equation.
    pub fn as_equation(&self) -> Option<(&Term, &Term)> {
        match self {
            Term::Apply(op, args) if op.as_str() == "eq" && args.len() == 2 => Some((&args[0], &args[1])),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Term]> {
        match self {
            Term::Apply(op, args) if op.as_str() == "list" => Some(args),
            _ => None,
        }
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Apply(_, args) => args.iter().collect(),
            Term::Binder(_, _, body) => vec![body.as_ref()],
            _ => Vec::new(),
        }
    }

    pub fn child_count(&self) -> usize {
        match self {
            Term::Apply(_, args) => args.len(),
            Term::Binder(..) => 1,
            _ => 0,
        }
    }

    pub fn child(&self, i: usize) -> Option<&Term> {
        match self {
            Term::Apply(_, args) => args.get(i),
            Term::Binder(_, _, body) if i == 0 => Some(body),
            _ => None,
        }
    }

    pub fn child_mut(&mut self, i: usize) -> Option<&mut Term> {
        match self {
            Term::Apply(_, args) => args.get_mut(i),
            Term::Binder(_, _, body) if i == 0 => Some(body),
            _ => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.child_count() == 0 && !matches!(self, Term::Apply(..))
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Term::Apply(_, args) => args.iter().map(Term::leaf_count).sum(),
            Term::Binder(_, _, body) => body.leaf_count(),
            _ => 1,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().into_iter().map(Term::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().into_iter().map(Term::depth).max().unwrap_or(0)
    }

    /// Free variable names (including pattern variables), in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bound = Vec::new();
        collect_free(self, &mut bound, &mut out);
        out
    }

    pub fn free_var_set(&self) -> BTreeSet<String> {
        self.free_vars().into_iter().collect()
    }

    pub fn occurs_free(&self, name: &str) -> bool {
        match self {
            Term::Variable(v) => v == name,
            Term::Apply(_, args) => args.iter().any(|a| a.occurs_free(name)),
            Term::Binder(_, b, body) => b != name && body.occurs_free(name),
            _ => false,
        }
    }

    pub fn contains_binder(&self, kind: BinderKind) -> bool {
        match self {
            Term::Binder(k, _, body) => *k == kind || body.contains_binder(kind),
            Term::Apply(_, args) => args.iter().any(|a| a.contains_binder(kind)),
            _ => false,
        }
    }

    pub fn contains_op(&self, name: &str) -> bool {
        match self {
            Term::Apply(op, args) => op.as_str() == name || args.iter().any(|a| a.contains_op(name)),
            Term::Binder(_, _, body) => body.contains_op(name),
            _ => false,
        }
    }

    pub fn has_float(&self) -> bool {
        match self {
            Term::Number(n) => !n.is_exact(),
            _ => self.children().into_iter().any(Term::has_float),
        }
    }

    /// Pattern variables occurring anywhere (free or as binder names).
    pub fn pattern_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::Variable(v) if is_pattern_var(v) => {
                    out.insert(v.clone());
                }
                Term::Apply(_, args) => args.iter().for_each(|a| go(a, out)),
                Term::Binder(_, b, body) => {
                    if is_pattern_var(b) {
                        out.insert(b.clone());
                    }
                    go(body, out)
                }
                _ => {}
            }
        }
        go(self, &mut out);
        out
    }

    /// All operator ids used, including binder kinds.
    pub fn ops(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::Apply(op, args) => {
                    out.insert(op.as_str().to_string());
                    args.iter().for_each(|a| go(a, out));
                }
                Term::Binder(k, _, body) => {
                    out.insert(k.op_name().to_string());
                    go(body, out);
                }
                _ => {}
            }
        }
        go(self, &mut out);
        out
    }
}

fn collect_free(t: &Term, bound: &mut Vec<String>, out: &mut Vec<String>) {
    match t {
        Term::Variable(v) => {
            if !bound.contains(v) && !out.contains(v) {
                out.push(v.clone());
            }
        }
        Term::Apply(_, args) => args.iter().for_each(|a| collect_free(a, bound, out)),
        Term::Binder(_, b, body) => {
            bound.push(b.clone());
            collect_free(body, bound, out);
            bound.pop();
        }
        _ => {}
    }
}

/// Structural equality up to consistent renaming of bound names.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    fn go<'a>(a: &'a Term, b: &'a Term, env: &mut Vec<(&'a str, &'a str)>) -> bool {
        match (a, b) {
            (Term::Number(x), Term::Number(y)) => x == y,
            (Term::Constant(x), Term::Constant(y)) => x == y,
            (Term::Variable(x), Term::Variable(y)) => {
                let bx = env.iter().rposition(|(l, _)| *l == x.as_str());
                let by = env.iter().rposition(|(_, r)| *r == y.as_str());
                match (bx, by) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (Term::Apply(o1, a1), Term::Apply(o2, a2)) => {
                o1 == o2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| go(x, y, env))
            }
            (Term::Binder(k1, n1, b1), Term::Binder(k2, n2, b2)) => {
                if k1 != k2 {
                    return false;
                }
                env.push((n1.as_str(), n2.as_str()));
                let r = go(b1, b2, env);
                env.pop();
                r
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        alpha_eq(self, other)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        fn go<H: Hasher>(t: &Term, bound: &mut Vec<String>, state: &mut H) {
            match t {
                Term::Number(n) => {
                    0u8.hash(state);
                    n.hash(state);
                }
                Term::Variable(v) => match bound.iter().rposition(|b| b == v) {
                    Some(i) => {
                        1u8.hash(state);
                        (bound.len() - i).hash(state);
                    }
                    None => {
                        2u8.hash(state);
                        v.hash(state);
                    }
                },
                Term::Constant(c) => {
                    3u8.hash(state);
                    c.hash(state);
                }
                Term::Apply(op, args) => {
                    4u8.hash(state);
                    op.hash(state);
                    args.len().hash(state);
                    for a in args {
                        go(a, bound, state);
                    }
                }
                Term::Binder(k, n, body) => {
                    5u8.hash(state);
                    k.hash(state);
                    bound.push(n.clone());
                    go(body, bound, state);
                    bound.pop();
                }
            }
        }
        go(self, &mut Vec::new(), state)
    }
}

/// Total order on terms used by canonical ordering: numbers first, then
/// constants, variables, applications, binders.
pub fn term_cmp(a: &Term, b: &Term) -> Ordering {
    fn rank(t: &Term) -> u8 {
        match t {
            Term::Number(_) => 0,
            Term::Constant(_) => 1,
            Term::Variable(_) => 2,
            Term::Apply(..) => 3,
            Term::Binder(..) => 4,
        }
    }
    match (a, b) {
        (Term::Number(x), Term::Number(y)) => x
            .to_f64()
            .partial_cmp(&y.to_f64())
            .unwrap_or(Ordering::Equal)
            .then_with(|| x.to_linear().cmp(&y.to_linear())),
        (Term::Constant(x), Term::Constant(y)) | (Term::Variable(x), Term::Variable(y)) => x.cmp(y),
        (Term::Apply(o1, a1), Term::Apply(o2, a2)) => o1.cmp(o2).then_with(|| {
            for (x, y) in a1.iter().zip(a2) {
                let c = term_cmp(x, y);
                if c != Ordering::Equal {
                    return c;
                }
            }
            a1.len().cmp(&a2.len())
        }),
        (Term::Binder(k1, n1, b1), Term::Binder(k2, n2, b2)) => {
            k1.cmp(k2).then_with(|| n1.cmp(n2)).then_with(|| term_cmp(b1, b2))
        }
        _ => rank(a).cmp(&rank(b)),
    }
}

impl fmt::Display for Term {
    /// Linear rendering with the default notation; falls back to debug
    /// form for operators the default table does not know.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match render_linear(self, NotationTable::default_table()) {
            Ok(s) => f.write_str(&s),
            Err(_) => write!(f, "{self:?}"),
        }
    }
}

/// Terms travel as linear-notation strings.
impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text, &Signature::full()).map_err(serde::de::Error::custom)
    }
}
