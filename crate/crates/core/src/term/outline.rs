use serde::{Deserialize, Serialize};

use super::{render_linear, NotationTable, Path, Term};

/// Longest linear rendering kept per outline entry.
pub const OUTLINE_WIDTH: usize = 40;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineNode {
    pub path: Path,
    pub text: String,
    pub child_count: usize,
    pub children: Vec<OutlineNode>,
}

impl OutlineNode {
    /// Entries in preorder.
    pub fn flatten(&self) -> Vec<&OutlineNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.flatten());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.flatten().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub(crate) fn truncate(s: &str, width: usize) -> String {
    if s.chars().count() <= width {
        s.to_string()
    } else {
        let head: String = s.chars().take(width.saturating_sub(3)).collect();
        format!("{head}...")
    }
}

/// Depth-limited structural summary: nodes whose path length is at most
/// `depth`, each with a truncated linear rendering and its child count.
pub fn outline(t: &Term, depth: usize) -> OutlineNode {
    fn go(t: &Term, path: Path, depth: usize) -> OutlineNode {
        let text = render_linear(t, NotationTable::default_table()).unwrap_or_else(|_| format!("{t:?}"));
        let children = if path.len() < depth {
            (0..t.child_count()).map(|i| go(t.child(i).unwrap(), path.child(i), depth)).collect()
        } else {
            Vec::new()
        };
        OutlineNode { text: truncate(&text, OUTLINE_WIDTH), child_count: t.child_count(), path, children }
    }
    go(t, Path::root(), depth)
}
