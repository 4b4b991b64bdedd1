use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::knowledge::Tactic;
use crate::rewrite::Justification;
use crate::term::Term;

/// Why a formula follows from its predecessor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepJustification {
    /// A single rewrite, replayable from the rule name, path and bindings.
    Rule(Justification),
    /// A tactic executed by the solver; `text` is what the calculation shows.
    Tactic { tactic: Tactic, text: String },
}

impl StepJustification {
    pub fn tactic(t: &Tactic) -> Self {
        StepJustification::Tactic { tactic: t.clone(), text: describe(t) }
    }

    pub fn text(&self) -> String {
        match self {
            StepJustification::Rule(j) => format!("{} at {}", j.rule, j.path),
            StepJustification::Tactic { text, .. } => text.clone(),
        }
    }
}

/// Short text for a tactic as shown beside a step, e.g. `Substitute v`.
pub fn describe(t: &Tactic) -> String {
    match t {
        Tactic::Substitute { equation, function_of } => {
            let what = equation.as_equation().map(|(l, _)| l.to_string()).unwrap_or_else(|| equation.to_string());
            match function_of {
                Some(x) => format!("Substitute {what} as function of {x}"),
                None => format!("Substitute {what}"),
            }
        }
        Tactic::FilterByInterval { list, interval } => {
            let var = list.as_list().and_then(|items| {
                let first = items.first()?.as_equation()?.0;
                items.iter().all(|i| i.as_equation().is_some_and(|(l, _)| l == first)).then(|| first.to_string())
            });
            match var {
                Some(v) => format!("{v} in {interval}"),
                None => t.to_string(),
            }
        }
        Tactic::TakeEquation { list, index } => match list.as_list().and_then(|items| items.get(*index)) {
            Some(eq) => format!("Take {eq}"),
            None => t.to_string(),
        },
        other => other.to_string(),
    }
}

/// A node of the calculation shown to the learner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalcNode {
    Formula {
        formula: Term,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        justification: Option<StepJustification>,
        /// Entered by the learner off the method's path.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        detour: bool,
    },
    Sub {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        problem: Option<String>,
        collapsed: bool,
        children: Vec<CalcNode>,
    },
    Result {
        values: Vec<Term>,
    },
}

impl CalcNode {
    pub fn formula(formula: Term, justification: Option<StepJustification>) -> Self {
        CalcNode::Formula { formula, justification, detour: false }
    }

    pub fn sub(label: impl Into<String>, collapsed: bool) -> Self {
        CalcNode::Sub { label: label.into(), problem: None, collapsed, children: Vec::new() }
    }

    pub fn children(&self) -> &[CalcNode] {
        match self {
            CalcNode::Sub { children, .. } => children,
            _ => &[],
        }
    }

    /// The sub-calculation at `path` (indices into `children`).
    pub fn at(&self, path: &[usize]) -> Option<&CalcNode> {
        path.iter().try_fold(self, |n, &i| n.children().get(i))
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut CalcNode> {
        let mut n = self;
        for &i in path {
            n = match n {
                CalcNode::Sub { children, .. } => children.get_mut(i)?,
                _ => return None,
            };
        }
        Some(n)
    }

    /// All formulas in reading order.
    pub fn formulas(&self) -> Vec<(&Term, Option<&StepJustification>)> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a CalcNode, out: &mut Vec<(&'a Term, Option<&'a StepJustification>)>) {
            match n {
                CalcNode::Formula { formula, justification, .. } => out.push((formula, justification.as_ref())),
                CalcNode::Sub { children, .. } => children.iter().for_each(|c| walk(c, out)),
                CalcNode::Result { .. } => {}
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn last_formula(&self) -> Option<&Term> {
        self.formulas().last().map(|(t, _)| *t)
    }

    /// Indented plain-text view; collapsed subs show only their label.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out, 0, true);
        out
    }

    fn write_text(&self, out: &mut String, level: usize, expand_all: bool) {
        let pad = "  ".repeat(level);
        match self {
            CalcNode::Formula { formula, justification, detour } => {
                if let Some(j) = justification {
                    let _ = writeln!(out, "{pad}  [{}]", j.text());
                }
                let mark = if *detour { " (detour)" } else { "" };
                let _ = writeln!(out, "{pad}{formula}{mark}");
            }
            CalcNode::Sub { label, collapsed, children, .. } => {
                let sign = if *collapsed { "+" } else { "-" };
                let _ = writeln!(out, "{pad}{sign} {label}");
                if !*collapsed || expand_all {
                    for c in children {
                        c.write_text(out, level + 1, expand_all);
                    }
                }
            }
            CalcNode::Result { values } => {
                let vs: Vec<String> = values.iter().map(Term::to_string).collect();
                let _ = writeln!(out, "{pad}Result: [{}]", vs.join(", "));
            }
        }
    }
}
