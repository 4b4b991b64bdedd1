use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OpId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Arity {
    Fixed(usize),
    Variadic(Variadic),
}

/// Marker deserialized from the string `"variadic"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variadic {
    Variadic,
}

impl Arity {
    pub const VARIADIC: Arity = Arity::Variadic(Variadic::Variadic);

    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Fixed(k) => k == n,
            Arity::Variadic(_) => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Function,
    Predicate,
    Constant,
    Binder,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpDecl {
    pub op: OpId,
    pub arity: Arity,
    pub kind: OpKind,
}

/// Operators (and constants) a theory makes available to the parser.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    decls: BTreeMap<OpId, OpDecl>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, op: impl Into<OpId>, arity: Arity, kind: OpKind) {
        let op = op.into();
        self.decls.insert(op.clone(), OpDecl { op, arity, kind });
    }

    pub fn with(mut self, op: &str, arity: Arity, kind: OpKind) -> Self {
        self.declare(op, arity, kind);
        self
    }

    pub fn get(&self, op: &str) -> Option<&OpDecl> {
        self.decls.get(&OpId::new(op))
    }

    pub fn contains(&self, op: &str) -> bool {
        self.get(op).is_some()
    }

    pub fn is_constant(&self, name: &str) -> bool {
        matches!(self.get(name), Some(d) if d.kind == OpKind::Constant)
    }

    pub fn extend(&mut self, other: &Signature) {
        for (k, v) in &other.decls {
            self.decls.insert(k.clone(), v.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &OpDecl> {
        self.decls.values()
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    /// Every operator the default notation table knows, with its usual
    /// arity. Used where no theory context exists (one-shot rendering).
    pub fn full() -> Self {
        use Arity::Fixed;
        let mut s = Signature::new();
        for op in ["plus", "minus", "times", "div", "pow", "eq", "neq", "lt", "le", "gt", "ge", "and", "or", "implies", "app"] {
            s.declare(op, Fixed(2), OpKind::Function);
        }
        for op in ["neg", "not", "sqrt", "sin", "cos", "ln", "exp"] {
            s.declare(op, Fixed(1), OpKind::Function);
        }
        for op in ["ivl_oo", "ivl_co", "ivl_oc", "ivl_cc"] {
            s.declare(op, Fixed(2), OpKind::Function);
        }
        s.declare("list", Arity::VARIADIC, OpKind::Function);
        for b in ["forall", "lambda", "deriv"] {
            s.declare(b, Fixed(1), OpKind::Binder);
        }
        s.declare("pi", Fixed(0), OpKind::Constant);
        s.extend(&Signature::builtins());
        s
    }

    /// Built-in predicates and template functions, available in every theory.
    pub fn builtins() -> Self {
        let mut s = Signature::new();
        for p in ["is_num", "is_atom", "indep", "before", "has_head", "has_deriv", "is_poly_in", "is_root_in", "is_normal"] {
            s.declare(p, Arity::VARIADIC, OpKind::Predicate);
        }
        for f in ["nth", "lhs", "rhs", "len", "first_var", "calc", "degree"] {
            s.declare(f, Arity::VARIADIC, OpKind::Function);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_json_forms() {
        let a: Arity = serde_json::from_str("2").unwrap();
        assert_eq!(a, Arity::Fixed(2));
        let v: Arity = serde_json::from_str("\"variadic\"").unwrap();
        assert!(v.accepts(7));
    }
}
