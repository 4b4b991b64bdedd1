use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Term;

/// Child indices from the root; empty is the root itself.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(pub Vec<usize>);

impl Path {
    pub fn root() -> Self {
        Path(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<Path> {
        if self.0.is_empty() {
            None
        } else {
            Some(Path(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, i: usize) -> Path {
        let mut v = self.0.clone();
        v.push(i);
        Path(v)
    }

    pub fn starts_with(&self, prefix: &Path) -> bool {
        self.0.starts_with(&prefix.0)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl FromStr for Path {
    type Err = String;

    /// Accepts `[0,1]`, `0.1`, `0,1` or the empty string for the root.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        if inner.trim().is_empty() {
            return Ok(Path::root());
        }
        inner
            .split([',', '.'])
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad path component `{p}`")))
            .collect::<Result<Vec<_>, _>>()
            .map(Path)
    }
}

impl From<Vec<usize>> for Path {
    fn from(v: Vec<usize>) -> Self {
        Path(v)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("invalid path: index {index} at depth {depth} (node has {children} children)")]
pub struct PathError {
    pub depth: usize,
    pub index: usize,
    pub children: usize,
}

/// The node addressed by `p`.
pub fn subterm<'a>(t: &'a Term, p: &Path) -> Result<&'a Term, PathError> {
    let mut cur = t;
    for (depth, &i) in p.0.iter().enumerate() {
        cur = cur.child(i).ok_or(PathError { depth, index: i, children: cur.child_count() })?;
    }
    Ok(cur)
}

/// Copy of `t` with the node at `p` replaced.
pub fn replace_at(t: &Term, p: &Path, new: Term) -> Result<Term, PathError> {
    let mut out = t.clone();
    {
        let mut cur = &mut out;
        for (depth, &i) in p.0.iter().enumerate() {
            let n = cur.child_count();
            cur = cur.child_mut(i).ok_or(PathError { depth, index: i, children: n })?;
        }
        *cur = new;
    }
    Ok(out)
}

/// Every valid path in preorder.
pub fn all_paths(t: &Term) -> Vec<Path> {
    let mut out = Vec::new();
    fn go(t: &Term, cur: &mut Vec<usize>, out: &mut Vec<Path>) {
        out.push(Path(cur.clone()));
        for i in 0..t.child_count() {
            cur.push(i);
            go(t.child(i).unwrap(), cur, out);
            cur.pop();
        }
    }
    go(t, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Move {
    ToParent,
    ToFirstChild,
    ToNextSibling,
    ToPrevSibling,
}

impl FromStr for Move {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "to-parent" | "parent" | "up" => Ok(Move::ToParent),
            "to-first-child" | "child" | "down" => Ok(Move::ToFirstChild),
            "to-next-sibling" | "next" | "right" => Ok(Move::ToNextSibling),
            "to-prev-sibling" | "prev" | "left" => Ok(Move::ToPrevSibling),
            other => Err(format!("unknown move `{other}`")),
        }
    }
}

/// A position inside a term plus the set of collapsed subtrees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cursor {
    pub term: Term,
    pub at: Path,
    pub collapsed: BTreeSet<Path>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Moved {
    pub cursor: Cursor,
    pub boundary: bool,
}

impl Cursor {
    pub fn new(term: Term) -> Self {
        Cursor { term, at: Path::root(), collapsed: BTreeSet::new() }
    }

    /// Builds a cursor, rejecting invalid paths and moving `at` out of any
    /// collapsed subtree onto its collapse root.
    pub fn with(term: Term, at: Path, collapsed: BTreeSet<Path>) -> Result<Self, PathError> {
        subterm(&term, &at)?;
        for c in &collapsed {
            subterm(&term, c)?;
        }
        let mut cursor = Cursor { term, at, collapsed };
        if let Some(root) = cursor.collapse_root_of(&cursor.at) {
            cursor.at = root;
        }
        Ok(cursor)
    }

    pub fn focus(&self) -> &Term {
        subterm(&self.term, &self.at).expect("cursor path is valid")
    }

    pub fn is_collapsed(&self, p: &Path) -> bool {
        self.collapsed.contains(p)
    }

    /// Outermost collapsed ancestor strictly above `p`.
    fn collapse_root_of(&self, p: &Path) -> Option<Path> {
        self.collapsed.iter().filter(|c| p.starts_with(c) && p.len() > c.len()).min_by_key(|c| c.len()).cloned()
    }

    pub fn toggle_collapse(&mut self, p: Path) {
        if !self.collapsed.remove(&p) {
            self.collapsed.insert(p);
        }
        if let Some(root) = self.collapse_root_of(&self.at) {
            self.at = root;
        }
    }
}

pub fn navigate(c: &Cursor, m: Move) -> Moved {
    let stay = || Moved { cursor: c.clone(), boundary: true };
    let node = c.focus();
    let target = match m {
        Move::ToParent => match c.at.parent() {
            Some(p) => p,
            None => return stay(),
        },
        Move::ToFirstChild => {
            if node.child_count() == 0 || c.is_collapsed(&c.at) {
                return stay();
            }
            c.at.child(0)
        }
        Move::ToNextSibling | Move::ToPrevSibling => {
            let Some(parent) = c.at.parent() else { return stay() };
            let idx = *c.at.0.last().unwrap();
            let siblings = subterm(&c.term, &parent).map(Term::child_count).unwrap_or(0);
            let next = if m == Move::ToNextSibling { idx.checked_add(1).filter(|n| *n < siblings) } else { idx.checked_sub(1) };
            match next {
                Some(n) => parent.child(n),
                None => return stay(),
            }
        }
    };
    let mut cursor = c.clone();
    cursor.at = target;
    Moved { cursor, boundary: false }
}
