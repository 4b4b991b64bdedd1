//! The specification phase: the learner fills in a Model (Given, Where,
//! Find, Relate) and References; input is graded against the example's
//! hidden formalisations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{Example, Formalisation, KnowledgeStore};
use crate::par::Exec;
use crate::rewrite::{eval_pred, substitute, Env, Substitution, Truth};
use crate::solve::{canonical, constants_of, formalisation_items, instantiate, SolveError, SolveState};
use crate::term::{parse, BinderKind, Signature, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Field {
    Given,
    Find,
    Relate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    RTheory,
    RProblem,
    RMethod,
}

/// Feedback on a single input event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feedback {
    Correct,
    Superfluous,
    Missing { labels: Vec<String> },
    Incomplete,
    SyntaxError { position: usize, message: String },
    False { predicate: Term },
}

/// One line typed by the learner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub field: Field,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<Term>,
    pub feedback: Feedback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub checked: bool,
    pub feedback: Feedback,
}

impl Reference {
    fn new(checked: bool) -> Self {
        Reference { id: None, checked, feedback: Feedback::Incomplete }
    }
}

/// The Model being filled in, plus references and grading state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecState {
    pub example: String,
    pub items: Vec<Item>,
    /// Learner identifier → formalisation identifier.
    pub renaming: BTreeMap<String, String>,
    pub references: BTreeMap<Slot, Reference>,
    pub active: usize,
    pub scores: Vec<usize>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("unbound placeholder(s): {}", .0.join(", "))]
    UnboundPlaceholders(Vec<String>),
}

/// A where-clause of the problem pattern, instantiated for the example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhereResult {
    pub predicate: Term,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCheck {
    pub overall: Feedback,
    pub missing: Vec<String>,
    #[serde(rename = "where")]
    pub where_: Vec<WhereResult>,
    /// Missing and False findings, in that order.
    pub findings: Vec<Feedback>,
    pub active: String,
}

/// What a formalisation expects in one slot of the model.
#[derive(Clone, Debug)]
enum Target {
    Term { field: Field, label: String, canon: Term },
    Names { label: String, names: BTreeSet<String> },
}

impl Target {
    fn label(&self) -> &str {
        match self {
            Target::Term { label, .. } | Target::Names { label, .. } => label,
        }
    }
}

/// A graded view of a student item.
enum Probe {
    Term { field: Field, canon: Term },
    Names(BTreeSet<String>),
    Invalid,
}

impl SpecState {
    pub fn new(store: &KnowledgeStore, example: &str) -> Result<SpecState, SpecError> {
        let ex = store.example(example).ok_or_else(|| SpecError::UnknownExample(example.into()))?;
        let references = [(Slot::RTheory, Reference::new(false)), (Slot::RProblem, Reference::new(true)), (Slot::RMethod, Reference::new(false))]
            .into_iter()
            .collect();
        Ok(SpecState {
            example: example.into(),
            items: Vec::new(),
            renaming: BTreeMap::new(),
            references,
            active: 0,
            scores: vec![0; ex.formalisations.len()],
        })
    }

    fn example<'s>(&self, store: &'s KnowledgeStore) -> &'s Example {
        store.example(&self.example).expect("example exists for the state's lifetime")
    }

    pub fn active_formalisation<'s>(&self, store: &'s KnowledgeStore) -> &'s Formalisation {
        &self.example(store).formalisations[self.active]
    }

    /// Theory whose signature parses input: the chosen RTheory, else the
    /// theory of the example's problem.
    pub fn parse_theory(&self, store: &KnowledgeStore) -> String {
        match &self.references[&Slot::RTheory].id {
            Some(t) => t.clone(),
            None => store.problem(&self.example(store).problem).map(|p| p.theory.clone()).unwrap_or_default(),
        }
    }

    fn signature(&self, store: &KnowledgeStore) -> Signature {
        store.signature(&self.parse_theory(store)).cloned().unwrap_or_else(Signature::full)
    }

    /// Enters one item and re-grades the whole model.
    pub fn input_item(&mut self, store: &KnowledgeStore, field: Field, text: &str) -> Feedback {
        self.items.push(Item { field, text: text.to_string(), term: None, feedback: Feedback::Incomplete });
        self.evaluate(store);
        self.items.last().unwrap().feedback.clone()
    }

    pub fn set_reference(&mut self, store: &KnowledgeStore, slot: Slot, id: &str) -> Feedback {
        let known = match slot {
            Slot::RTheory => store.theory(id).is_some(),
            Slot::RProblem => store.problem(id).is_some(),
            Slot::RMethod => store.method(id).is_some(),
        };
        if !known {
            return Feedback::SyntaxError { position: 0, message: format!("{slot:?}: unknown id `{id}`") };
        }
        self.references.get_mut(&slot).unwrap().id = Some(id.to_string());
        self.evaluate(store);
        self.references[&slot].feedback.clone()
    }

    pub fn toggle_reference_checkbox(&mut self, slot: Slot) {
        let r = self.references.get_mut(&slot).unwrap();
        r.checked = !r.checked;
    }

    /// Items revealed by the RMethod checkbox: the active variant's interval.
    pub fn revealed(&self, store: &KnowledgeStore) -> Vec<Term> {
        if self.references[&Slot::RMethod].checked {
            vec![self.active_formalisation(store).interval.to_term()]
        } else {
            Vec::new()
        }
    }

    /// Extends the renaming by `from → to`. Requests that would map two
    /// identifiers to one are rejected and leave the state unchanged.
    pub fn rename_identifiers(&mut self, store: &KnowledgeStore, from: &str, to: &str) -> Feedback {
        if from == to && !self.renaming.contains_key(from) {
            return Feedback::Correct;
        }
        let mut next = self.renaming.clone();
        if from == to {
            next.remove(from);
        } else {
            next.insert(from.to_string(), to.to_string());
        }
        let sig = self.signature(store);
        let mut names: BTreeSet<String> = self.items.iter().filter_map(|i| parse_item(&i.text, i.field, &sig).ok()).flat_map(|t| t.free_vars()).collect();
        names.insert(from.to_string());
        let mut images: BTreeMap<String, String> = BTreeMap::new();
        for n in &names {
            let img = next.get(n).cloned().unwrap_or_else(|| n.clone());
            if let Some(other) = images.insert(img, n.clone()) {
                if other != *n {
                    return Feedback::Superfluous;
                }
            }
        }
        self.renaming = next;
        self.evaluate(store);
        Feedback::Correct
    }

    fn rename(&self, t: &Term) -> Term {
        if self.renaming.is_empty() {
            return t.clone();
        }
        let s: Substitution = self.renaming.iter().map(|(k, v)| (k.clone(), Term::var(v))).collect();
        substitute(&s, t)
    }

    /// Re-parses and re-grades every item and reference.
    fn evaluate(&mut self, store: &KnowledgeStore) {
        let sig = self.signature(store);
        let theory = self.comparison_theory(store);
        let ex = self.example(store).clone();
        let mut probes = Vec::new();
        for item in &mut self.items {
            match parse_item(&item.text, item.field, &sig) {
                Ok(t) => {
                    item.term = Some(t);
                    item.feedback = Feedback::Incomplete;
                }
                Err(e) => {
                    item.term = None;
                    item.feedback = Feedback::SyntaxError { position: e.position, message: e.message };
                }
            }
        }
        for item in &self.items {
            probes.push(match &item.term {
                Some(t) => probe(store, &theory, item.field, &self.rename(t)),
                None => Probe::Invalid,
            });
        }
        let targets: Vec<Vec<Target>> = ex.formalisations.iter().map(|f| targets_of(store, &theory, f)).collect();
        self.scores = targets.iter().map(|ts| assign(&probes, ts).iter().filter(|m| m.is_some()).count()).collect();
        // argmax, ties to the lowest index
        self.active = self.scores.iter().enumerate().fold(0, |best, (i, &s)| if s > self.scores[best] { i } else { best });
        let matched = assign(&probes, &targets[self.active]);
        for (item, m) in self.items.iter_mut().zip(&matched) {
            if item.term.is_some() {
                item.feedback = if m.is_some() { Feedback::Correct } else { Feedback::Superfluous };
            }
        }
        let refs = &ex.formalisations[self.active].references;
        for (slot, expected) in [(Slot::RTheory, &refs.theory), (Slot::RProblem, &refs.problem), (Slot::RMethod, &refs.method)] {
            let r = self.references.get_mut(&slot).unwrap();
            r.feedback = match &r.id {
                Some(id) if id == expected => Feedback::Correct,
                _ => Feedback::Incomplete,
            };
        }
    }

    /// Theory whose canonical ordering compares items.
    fn comparison_theory(&self, store: &KnowledgeStore) -> String {
        let t = self.parse_theory(store);
        if store.ruleset(&t, "canon").is_some() {
            t
        } else {
            self.example(store).formalisations[0].references.theory.clone()
        }
    }

    /// Missing items, where-clauses and the overall status.
    pub fn check_model(&self, store: &KnowledgeStore) -> ModelCheck {
        let f = self.active_formalisation(store);
        let theory = self.comparison_theory(store);
        let probes: Vec<Probe> = self
            .items
            .iter()
            .map(|i| match &i.term {
                Some(t) => probe(store, &theory, i.field, &self.rename(t)),
                None => Probe::Invalid,
            })
            .collect();
        let targets = targets_of(store, &theory, f);
        let matched = assign(&probes, &targets);
        let taken: BTreeSet<usize> = matched.iter().flatten().copied().collect();
        let mut missing: Vec<String> = Vec::new();
        for (i, t) in targets.iter().enumerate() {
            if !taken.contains(&i) && !missing.iter().any(|m| m == t.label()) {
                missing.push(t.label().to_string());
            }
        }
        // values known from matched Given items
        let given: Vec<Term> = self
            .items
            .iter()
            .zip(&matched)
            .filter(|(i, m)| i.field == Field::Given && m.is_some())
            .filter_map(|(i, _)| i.term.as_ref().map(|t| self.rename(t)))
            .collect();
        let env = constants_of(&given);
        let where_: Vec<WhereResult> = self
            .where_clauses(store)
            .into_iter()
            .map(|p| {
                // undecided (unbound identifiers) counts as not satisfied
                let holds = eval_pred(&p, &env) == Truth::True;
                WhereResult { predicate: p, holds }
            })
            .collect();
        let mut findings = Vec::new();
        if !missing.is_empty() {
            findings.push(Feedback::Missing { labels: missing.clone() });
        }
        findings.extend(where_.iter().filter(|w| !w.holds).map(|w| Feedback::False { predicate: w.predicate.clone() }));
        let refs_ok = self.references.values().all(|r| r.feedback == Feedback::Correct);
        let overall = if !missing.is_empty() {
            Feedback::Incomplete
        } else if let Some(w) = where_.iter().find(|w| !w.holds) {
            Feedback::False { predicate: w.predicate.clone() }
        } else if !refs_ok {
            Feedback::Incomplete
        } else {
            Feedback::Correct
        };
        ModelCheck { overall, missing, where_, findings, active: f.name.clone() }
    }

    /// The problem pattern's where-clauses instantiated with the active
    /// formalisation's items.
    pub fn where_clauses(&self, store: &KnowledgeStore) -> Vec<Term> {
        let ex = self.example(store);
        let Some(p) = store.problem(&ex.problem) else { return Vec::new() };
        let env = formalisation_bindings(self.active_formalisation(store));
        p.model.where_.iter().map(|w| instantiate(w, &env).unwrap_or_else(|_| w.clone())).collect()
    }

    /// Labels the template shows: problem-pattern labels when RProblem is
    /// checked, plus the method guard's extra Given labels when RMethod is.
    pub fn template_labels(&self, store: &KnowledgeStore) -> BTreeMap<Field, Vec<String>> {
        let mut out: BTreeMap<Field, Vec<String>> = [(Field::Given, vec![]), (Field::Find, vec![]), (Field::Relate, vec![])].into();
        let ex = self.example(store);
        if self.references[&Slot::RProblem].checked {
            if let Some(p) = store.problem(&ex.problem) {
                out.get_mut(&Field::Given).unwrap().extend(p.model.given.iter().map(|i| i.label.clone()));
                out.get_mut(&Field::Find).unwrap().extend(p.model.find.iter().map(|i| i.label.clone()));
                out.get_mut(&Field::Relate).unwrap().extend(p.model.relate.iter().map(|i| i.label.clone()));
            }
        }
        if self.references[&Slot::RMethod].checked {
            let f = self.active_formalisation(store);
            if let Some(g) = store.method(&f.references.method).and_then(|m| m.guard.as_ref()) {
                let given = out.get_mut(&Field::Given).unwrap();
                for i in &g.given {
                    if !given.contains(&i.label) {
                        given.push(i.label.clone());
                    }
                }
            }
        }
        out
    }

    /// Starts solving once the model is complete.
    pub fn start_solve(&self, store: &KnowledgeStore, exec: Exec) -> Result<SolveState, SolveError> {
        let check = self.check_model(store);
        if check.overall != Feedback::Correct {
            let mut missing = check.missing.clone();
            missing.extend(check.where_.iter().filter(|w| !w.holds).map(|w| w.predicate.to_string()));
            missing.extend(self.references.iter().filter(|(_, r)| r.feedback != Feedback::Correct).map(|(s, _)| format!("{s:?}")));
            return Err(SolveError::GuardUnsatisfied { missing });
        }
        let ex = self.example(store);
        let mut items = formalisation_items(ex, self.active).expect("active variant exists");
        if !self.references[&Slot::RMethod].checked {
            items.retain(|(l, _)| l != "Interval");
        }
        let method = self.references[&Slot::RMethod].id.clone().unwrap_or_default();
        SolveState::start(store, &self.example, &method, &items, exec)
    }
}

fn parse_item(text: &str, field: Field, sig: &Signature) -> Result<Term, crate::term::ParseError> {
    match parse(text, sig) {
        Ok(t) => Ok(t),
        // Find accepts a bare comma-separated list of identifiers
        Err(e) if field == Field::Find => parse(&format!("[{text}]"), sig).map_err(|_| e),
        Err(e) => Err(e),
    }
}

fn probe(store: &KnowledgeStore, theory: &str, field: Field, t: &Term) -> Probe {
    match field {
        Field::Find => {
            let names: Option<BTreeSet<String>> = match t.as_list() {
                Some(items) => items.iter().map(|i| i.as_var().map(str::to_string)).collect(),
                None => t.as_var().map(|v| BTreeSet::from([v.to_string()])),
            };
            names.map_or(Probe::Invalid, Probe::Names)
        }
        _ => Probe::Term { field, canon: canonical(store, theory, t) },
    }
}

fn targets_of(store: &KnowledgeStore, theory: &str, f: &Formalisation) -> Vec<Target> {
    let mut out = Vec::new();
    for l in &f.given {
        for t in &l.items {
            out.push(Target::Term { field: Field::Given, label: l.label.clone(), canon: canonical(store, theory, t) });
        }
    }
    for l in &f.find {
        let names = l.items.iter().filter_map(|t| t.as_var().map(str::to_string)).collect();
        out.push(Target::Names { label: l.label.clone(), names });
    }
    for t in &f.relate {
        out.push(Target::Term { field: Field::Relate, label: "Relate".into(), canon: canonical(store, theory, t) });
    }
    out
}

/// Greedy matching in entry order: each probe takes the first free target
/// it equals. Returns the target index per probe.
fn assign(probes: &[Probe], targets: &[Target]) -> Vec<Option<usize>> {
    let mut taken = vec![false; targets.len()];
    probes
        .iter()
        .map(|p| {
            let hit = targets.iter().enumerate().position(|(i, t)| {
                !taken[i]
                    && match (p, t) {
                        (Probe::Term { field, canon }, Target::Term { field: f2, canon: c2, .. }) => field == f2 && canon == c2,
                        (Probe::Names(a), Target::Names { names, .. }) => a == names,
                        _ => false,
                    }
            });
            if let Some(i) = hit {
                taken[i] = true;
            }
            hit
        })
        .collect()
}

/// `?Label` bindings for a formalisation's items: lists per label,
/// `?Relate` for the relations and `?Interval` for the interval.
pub fn formalisation_bindings(f: &Formalisation) -> Env {
    let mut env = Env::new();
    for l in f.given.iter().chain(&f.find) {
        env.insert(format!("?{}", l.label), Term::list(l.items.clone()));
    }
    env.insert("?Relate".into(), Term::list(f.relate.clone()));
    env.insert("?Interval".into(), Term::list(vec![f.interval.to_term()]));
    env
}

fn conj(ts: &[Term]) -> Option<Term> {
    ts.iter().cloned().reduce(|a, b| Term::binary("and", a, b))
}

fn prime(t: &Term, names: &[String]) -> Term {
    let s: Substitution = names.iter().map(|n| (n.clone(), Term::var(format!("{n}'")))).collect();
    substitute(&s, t)
}

/// Fills a post-condition template. Placeholders: `?Relate` (conjunction
/// of the relations), `?Maximum` (first Maximum item), primed versions of
/// both, and binders named `?Find'` which quantify the primed unknowns
/// (Find items first, then the other unknowns of the relations).
pub fn instantiate_postcondition(template: &Term, f: &Formalisation) -> Result<Term, SpecError> {
    let constants: BTreeSet<String> =
        f.given.iter().flat_map(|l| &l.items).filter_map(|t| t.as_equation().and_then(|(l, _)| l.as_var()).map(str::to_string)).collect();
    let mut unknowns: Vec<String> = f.find.iter().flat_map(|l| &l.items).filter_map(|t| t.as_var().map(str::to_string)).collect();
    for r in &f.relate {
        for v in r.free_vars() {
            if !constants.contains(&v) && !unknowns.contains(&v) {
                unknowns.push(v);
            }
        }
    }
    let mut s = Substitution::new();
    if let Some(c) = conj(&f.relate) {
        s.insert("?Relate'", prime(&c, &unknowns));
        s.insert("?Relate", c);
    }
    if let Some(m) = f.find.iter().find(|l| l.label == "Maximum").and_then(|l| l.items.first()) {
        s.insert("?Maximum'", prime(m, &unknowns));
        s.insert("?Maximum", m.clone());
    }
    // binders are expanded after substitution so that the primed names
    // capture the primed relation on purpose
    let out = expand_find_binders(&substitute(&s, template), &unknowns);
    let left: Vec<String> = out.pattern_vars().into_iter().collect();
    if !left.is_empty() {
        return Err(SpecError::UnboundPlaceholders(left));
    }
    Ok(out)
}

fn expand_find_binders(t: &Term, unknowns: &[String]) -> Term {
    match t {
        Term::Binder(k, name, body) if name == "?Find'" => {
            let body = expand_find_binders(body, unknowns);
            unknowns.iter().rev().fold(body, |b, n| Term::binder(*k, format!("{n}'"), b))
        }
        Term::Binder(k, name, body) => Term::binder(*k, name.clone(), expand_find_binders(body, unknowns)),
        Term::Apply(op, args) => Term::Apply(op.clone(), args.iter().map(|a| expand_find_binders(a, unknowns)).collect()),
        _ => t.clone(),
    }
}

/// The body of the outermost universal quantifier of a post-condition
/// (the part checked at sample points), if any.
pub fn quantified_body(t: &Term) -> Option<&Term> {
    match t {
        Term::Binder(BinderKind::Forall, _, body) => quantified_body(body).or(Some(body)),
        Term::Apply(_, args) => args.iter().find_map(quantified_body),
        _ => None,
    }
}

/// Evaluates `predicate` under each environment; used to falsify
/// post-conditions numerically.
pub fn check_samples(exec: Exec, predicate: &Term, envs: &[Env]) -> Vec<Truth> {
    exec.map(envs, |e| eval_pred(predicate, e))
}
