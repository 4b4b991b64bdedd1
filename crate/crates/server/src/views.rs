//! JSON payloads. Every term goes out in both renderings: `linear` (the
//! ASCII line) and `pretty` (path-annotated markup).

use serde_json::{json, Map, Value};

use mawen_core::knowledge::KnowledgeStore;
use mawen_core::rewrite::Justification;
use mawen_core::solve::{CalcNode, Proposal, StepCheck, StepJustification};
use mawen_core::spec::{Feedback, ModelCheck, SpecState};
use mawen_core::term::{render_linear, render_pretty, NotationTable, OutlineNode, Term};

pub fn term(t: &Term) -> Value {
    let linear = render_linear(t, NotationTable::default_table()).unwrap_or_else(|_| t.to_string());
    let pretty = render_pretty(t).unwrap_or_default();
    json!({ "linear": linear, "pretty": pretty })
}

pub fn terms(ts: &[Term]) -> Value {
    Value::Array(ts.iter().map(term).collect())
}

pub fn feedback(f: &Feedback) -> Value {
    match f {
        Feedback::False { predicate } => json!({ "False": { "predicate": term(predicate) } }),
        other => serde_json::to_value(other).expect("feedback serializes"),
    }
}

pub fn model(store: &KnowledgeStore, st: &SpecState) -> Value {
    let ex = store.example(&st.example);
    let items: Vec<Value> = st
        .items
        .iter()
        .map(|i| {
            let mut o = json!({ "field": i.field, "source": "student", "text": i.text, "feedback": feedback(&i.feedback) });
            if let Some(t) = &i.term {
                o["term"] = term(t);
            }
            o
        })
        .collect();
    let revealed: Vec<Value> =
        st.revealed(store).iter().map(|t| json!({ "field": "Given", "source": "revealed", "term": term(t) })).collect();
    let references: Map<String, Value> = st
        .references
        .iter()
        .map(|(slot, r)| (format!("{slot:?}"), json!({ "id": r.id, "checked": r.checked, "feedback": feedback(&r.feedback) })))
        .collect();
    json!({
        "example": st.example,
        "statement": ex.map(|e| e.statement.clone()),
        "labels": st.template_labels(store),
        "items": items,
        "revealed": revealed,
        "where": terms(&st.where_clauses(store)),
        "references": references,
        "renaming": st.renaming,
        "active": st.active_formalisation(store).name,
    })
}

pub fn check(c: &ModelCheck) -> Value {
    json!({
        "overall": feedback(&c.overall),
        "missing": c.missing,
        "where": c.where_.iter().map(|w| json!({ "predicate": term(&w.predicate), "holds": w.holds })).collect::<Vec<_>>(),
        "findings": c.findings.iter().map(feedback).collect::<Vec<_>>(),
        "active": c.active,
    })
}

pub fn justification(j: &Justification) -> Value {
    let bindings: Map<String, Value> = j.bindings.iter().map(|(k, v)| (k.clone(), term(v))).collect();
    json!({ "kind": "rule", "rule": j.rule, "path": j.path, "bindings": bindings })
}

fn step_justification(j: &StepJustification) -> Value {
    match j {
        StepJustification::Rule(j) => justification(j),
        StepJustification::Tactic { .. } => {
            let mut v = serde_json::to_value(j).expect("justification serializes");
            v["text"] = json!(j.text());
            v
        }
    }
}

pub fn calc(n: &CalcNode) -> Value {
    match n {
        CalcNode::Formula { formula, justification, detour } => {
            let mut o = json!({ "kind": "formula", "formula": term(formula) });
            if let Some(j) = justification {
                o["justification"] = step_justification(j);
            }
            if *detour {
                o["detour"] = json!(true);
            }
            o
        }
        CalcNode::Sub { label, problem, collapsed, children } => json!({
            "kind": "sub",
            "label": label,
            "problem": problem,
            "collapsed": collapsed,
            "children": children.iter().map(calc).collect::<Vec<_>>(),
        }),
        CalcNode::Result { values } => json!({ "kind": "result", "values": terms(values) }),
    }
}

pub fn proposal(p: &Proposal) -> Value {
    match p {
        Proposal::Step { tactic, text, formula } => {
            let mut o = json!({ "kind": "step", "tactic": tactic, "text": text });
            if let Some(f) = formula {
                o["formula"] = term(f);
            }
            o
        }
        Proposal::Finished { values } => json!({ "kind": "finished", "values": terms(values) }),
    }
}

pub fn step_check(c: &StepCheck) -> Value {
    match c {
        StepCheck::Proposed { tactic } => json!({ "kind": "proposed", "tactic": tactic }),
        StepCheck::Derived { steps } => json!({
            "kind": "derived",
            "steps": steps.iter().map(|s| json!({ "formula": term(&s.formula), "justification": justification(&s.justification) })).collect::<Vec<_>>(),
        }),
        StepCheck::Rejected { reason, position } => json!({ "kind": "rejected", "reason": reason, "position": position }),
    }
}

pub fn outline(n: &OutlineNode) -> Value {
    json!({
        "path": n.path,
        "text": n.text,
        "child_count": n.child_count,
        "children": n.children.iter().map(outline).collect::<Vec<_>>(),
    })
}
