//! Solving: a method program is run ahead of time into a trace; the
//! learner then follows (or departs from) the proposed steps.

mod calc;
mod exec;
mod program;
mod search;

pub use calc::{describe, CalcNode, StepJustification};
pub use exec::{find_roots, instantiate, run_tactic, Ctx, Outcome, SubDerivation, TacticError, ROOT_TOLERANCE, SCAN_POINTS};
pub use program::{effects_of, run_program, Effect, ProgramError, Trace, TraceStep, MAX_STEPS};
pub use search::{first_difference, search, successors, MAX_FRONTIER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{Example, KnowledgeStore, ModelTemplate, Tactic};
use crate::par::Exec;
use crate::rewrite::{eval_exact, eval_pred, match_term, normalize, Env, Justification, RewriteRule, Truth, DEFAULT_FUEL};
use crate::term::{Path, Term};

/// Default depth of the search that checks typed-in steps.
pub const DEFAULT_STEP_DEPTH: usize = 2;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("unknown {what} `{id}`")]
    Unknown { what: &'static str, id: String },
    #[error("guard not satisfied: {}", missing.join(", "))]
    GuardUnsatisfied { missing: Vec<String> },
    #[error("method `{0}` has no program")]
    NoProgram(String),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Tactic(#[from] TacticError),
    #[error("the method has not terminated")]
    NotTerminated,
    #[error("the calculation is finished")]
    Finished,
}

/// What the method suggests next.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    Step {
        tactic: Tactic,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        formula: Option<Term>,
    },
    Finished {
        values: Vec<Term>,
    },
}

/// How a typed-in formula was judged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepCheck {
    /// Equal (up to canonical ordering) to the method's next formula.
    Proposed { tactic: Tactic },
    /// Reachable from the current formula by these rewrites.
    Derived { steps: Vec<DerivedStep> },
    Rejected {
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<Path>,
    },
}

impl StepCheck {
    pub fn accepted(&self) -> bool {
        !matches!(self, StepCheck::Rejected { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedStep {
    pub formula: Term,
    pub justification: Justification,
}

/// How a committed tactic related to the method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Committed {
    Proposed,
    Detour,
    /// A detour that arrived where the method would have been.
    Resynced,
}

/// The solving phase of one example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolveState {
    pub example: String,
    pub method: String,
    pub theory: String,
    pub env: Env,
    pub trace: Trace,
    pub pc: usize,
    pub calc: CalcNode,
    /// Child indices from the root to the innermost open sub-calculation.
    pub open: Vec<usize>,
    pub float: Option<u8>,
    pub current: Option<Term>,
    pub detour: bool,
    pub depth: usize,
    pub finished: bool,
    #[serde(skip)]
    pub exec: Exec,
}

/// Binds guard templates to the labelled items of a model. `items`
/// yields `(label, terms)`; labels without items are reported missing.
pub fn bind_guard(guard: &ModelTemplate, items: &[(String, Vec<Term>)]) -> Result<Env, SolveError> {
    let mut env = Env::new();
    let mut missing = Vec::new();
    for tpl in guard.given.iter().chain(&guard.find).chain(&guard.relate) {
        let found = items.iter().find(|(l, _)| *l == tpl.label).filter(|(_, ts)| !ts.is_empty());
        match found.and_then(|(_, ts)| match_term(&tpl.pattern, &Term::list(ts.clone()))) {
            Some(s) => env.extend(s.iter().map(|(k, v)| (k.clone(), v.clone()))),
            None => missing.push(tpl.label.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(SolveError::GuardUnsatisfied { missing });
    }
    Ok(env)
}

/// Numeric constants among given items: `r = 7` binds `r`.
pub fn constants_of<'a>(items: impl IntoIterator<Item = &'a Term>) -> Env {
    let mut env = Env::new();
    for t in items {
        if let Some((Term::Variable(x), v)) = t.as_equation() {
            if eval_exact(v, &Env::new()).is_some() || matches!(v, Term::Number(_)) {
                env.insert(x.clone(), v.clone());
            }
        }
    }
    env
}

/// Labelled items of a formalisation, including the revealed interval.
pub fn formalisation_items(ex: &Example, index: usize) -> Option<Vec<(String, Vec<Term>)>> {
    let f = ex.formalisations.get(index)?;
    let mut items: Vec<(String, Vec<Term>)> = f.given.iter().map(|l| (l.label.clone(), l.items.clone())).collect();
    items.push(("Interval".into(), vec![f.interval.to_term()]));
    items.extend(f.find.iter().map(|l| (l.label.clone(), l.items.clone())));
    items.push(("Relate".into(), f.relate.clone()));
    Some(items)
}

/// Canonical form used to compare formulas: the theory's `canon` rule set.
pub fn canonical(store: &KnowledgeStore, theory: &str, t: &Term) -> Term {
    match store.ruleset(theory, "canon") {
        Some(set) => normalize(set, t, DEFAULT_FUEL).unwrap_or_else(|_| t.clone()),
        None => t.clone(),
    }
}

impl SolveState {
    /// Starts solving with `items` (labelled model items) under `method`.
    pub fn start(
        store: &KnowledgeStore,
        example: &str,
        method: &str,
        items: &[(String, Vec<Term>)],
        exec: Exec,
    ) -> Result<SolveState, SolveError> {
        let ex = store.example(example).ok_or_else(|| SolveError::Unknown { what: "example", id: example.into() })?;
        let m = store.method(method).ok_or_else(|| SolveError::Unknown { what: "method", id: method.into() })?;
        let program = m.program.as_ref().ok_or_else(|| SolveError::NoProgram(method.into()))?;
        let guard = m.guard.clone().unwrap_or_default();
        let mut env = bind_guard(&guard, items)?;
        let given: Vec<&Term> = items.iter().flat_map(|(_, ts)| ts).collect();
        env.extend(constants_of(given));
        let failed: Vec<String> = guard.where_.iter().filter(|w| eval_pred(w, &env) != Truth::True).map(|w| w.to_string()).collect();
        if !failed.is_empty() {
            return Err(SolveError::GuardUnsatisfied { missing: failed });
        }
        let ctx = Ctx { store, theory: &m.theory, env: &env, float: None, exec, cancel: None };
        let trace = run_program(&ctx, program, env.clone())?;
        let spec: Vec<CalcNode> = items.iter().flat_map(|(_, ts)| ts.iter().map(|t| CalcNode::formula(t.clone(), None))).collect();
        let calc = CalcNode::Sub {
            label: format!("Example {}", ex.id),
            problem: Some(ex.problem.clone()),
            collapsed: false,
            children: vec![
                CalcNode::Sub { label: "Specification".into(), problem: None, collapsed: true, children: spec },
                CalcNode::Sub { label: "Solution".into(), problem: Some(method.into()), collapsed: false, children: Vec::new() },
            ],
        };
        Ok(SolveState {
            example: example.into(),
            method: method.into(),
            theory: m.theory.clone(),
            env,
            trace,
            pc: 0,
            calc,
            open: vec![1],
            float: None,
            current: None,
            detour: false,
            depth: DEFAULT_STEP_DEPTH,
            finished: false,
            exec,
        })
    }

    pub fn propose_next(&self) -> Proposal {
        match self.trace.steps.get(self.pc) {
            Some(s) => Proposal::Step { text: describe(&s.tactic), tactic: s.tactic.clone(), formula: s.last_formula().cloned() },
            None => Proposal::Finished { values: self.trace.result.clone() },
        }
    }

    /// Commits a tactic: the proposed one follows the method; any other
    /// runs against the current formula as a detour.
    pub fn commit_step(&mut self, store: &KnowledgeStore, tactic: &Tactic) -> Result<Committed, SolveError> {
        if self.finished {
            return Err(SolveError::Finished);
        }
        if let Some(step) = self.trace.steps.get(self.pc) {
            if step.tactic == *tactic {
                let effects = step.effects.clone();
                self.apply(&effects, false);
                self.pc += 1;
                self.detour = false;
                return Ok(Committed::Proposed);
            }
        }
        let mut env = self.env.clone();
        if let Some(c) = &self.current {
            env.insert("?current".into(), c.clone());
        }
        let tactic = tactic.map_terms(|t| instantiate(t, &env)).map_err(|e| SolveError::Tactic(TacticError::Template(e)))?;
        let ctx = Ctx { store, theory: &self.theory, env: &self.env, float: self.float, exec: self.exec, cancel: None };
        let out = run_tactic(&ctx, &tactic, self.current.as_ref())?;
        self.apply(&effects_of(&out), true);
        Ok(self.resync(store))
    }

    /// Judges a typed-in formula against the method and the rules.
    pub fn check_user_step(&self, store: &KnowledgeStore, input: &Term) -> StepCheck {
        let canon = |t: &Term| canonical(store, &self.theory, t);
        let goal = canon(input);
        let next = self.trace.steps.get(self.pc).and_then(TraceStep::last_formula);
        if let Some(n) = next {
            if canon(n) == goal {
                return StepCheck::Proposed { tactic: self.trace.steps[self.pc].tactic.clone() };
            }
        }
        let Some(cur) = &self.current else {
            return StepCheck::Rejected { reason: "does not match the next step".into(), position: next.and_then(|n| first_difference(input, n)) };
        };
        if canon(cur) == goal {
            return StepCheck::Rejected { reason: "no progress".into(), position: None };
        }
        let rules = self.step_rules(store);
        let contexts = self.contexts(cur);
        let found = search(self.exec, &rules, cur, &self.env, &contexts, self.depth, |t| canon(t) == goal);
        match found {
            Some(chain) => StepCheck::Derived {
                steps: chain.into_iter().map(|(formula, justification)| DerivedStep { formula, justification }).collect(),
            },
            None => StepCheck::Rejected {
                reason: format!("not derivable in {} steps", self.depth),
                position: first_difference(input, next.unwrap_or(cur)),
            },
        }
    }

    /// Checks a typed-in formula and, when accepted, appends it.
    pub fn input_step(&mut self, store: &KnowledgeStore, input: &Term) -> Result<StepCheck, SolveError> {
        if self.finished {
            return Err(SolveError::Finished);
        }
        let check = self.check_user_step(store, input);
        match &check {
            StepCheck::Proposed { tactic } => {
                let tactic = tactic.clone();
                self.commit_step(store, &tactic)?;
            }
            StepCheck::Derived { steps } => {
                let effects: Vec<Effect> = steps
                    .iter()
                    .map(|s| Effect::Formula { formula: s.formula.clone(), justification: Some(StepJustification::Rule(s.justification.clone())) })
                    .collect();
                self.apply(&effects, true);
                self.resync(store);
            }
            StepCheck::Rejected { .. } => {}
        }
        Ok(check)
    }

    /// The method's result once every proposed step is done.
    pub fn finish(&mut self) -> Result<Vec<Term>, SolveError> {
        if self.pc < self.trace.steps.len() {
            return Err(SolveError::NotTerminated);
        }
        if !self.finished {
            self.finished = true;
            let values = self.trace.result.clone();
            if let Some(CalcNode::Sub { children, .. }) = self.calc.at_mut(&[1]) {
                children.push(CalcNode::Result { values });
            }
            self.open = vec![1];
        }
        Ok(self.trace.result.clone())
    }

    /// Rules the step check may use: every visible rule set except the
    /// canonical ordering (comparison is modulo that anyway).
    pub fn step_rules(&self, store: &KnowledgeStore) -> Vec<RewriteRule> {
        let mut out: Vec<RewriteRule> = Vec::new();
        for set in store.rulesets(&self.theory).filter(|s| s.name != "canon") {
            for r in &set.rules {
                if !out.iter().any(|o| o.name == r.name) {
                    out.push(r.clone());
                }
            }
        }
        out
    }

    /// Context bindings for isolation rules: each unknown of `t`.
    fn contexts(&self, t: &Term) -> Vec<Env> {
        t.free_vars()
            .into_iter()
            .filter(|v| !self.env.contains_key(v) && v != "L")
            .map(|v| {
                let mut e = self.env.clone();
                e.insert("?x".into(), Term::var(v));
                e
            })
            .collect()
    }

    fn apply(&mut self, effects: &[Effect], detour: bool) {
        for e in effects {
            match e {
                Effect::OpenSub { label, problem, collapsed } => {
                    if let Some(CalcNode::Sub { children, .. }) = self.calc.at_mut(&self.open) {
                        children.push(CalcNode::Sub { label: label.clone(), problem: problem.clone(), collapsed: *collapsed, children: Vec::new() });
                        let i = children.len() - 1;
                        self.open.push(i);
                    }
                }
                Effect::CloseSub => {
                    if self.open.len() > 1 {
                        self.open.pop();
                    }
                }
                Effect::SetFloat { digits } => self.float = Some(*digits),
                Effect::Formula { formula, justification } => {
                    if let Some(CalcNode::Sub { children, .. }) = self.calc.at_mut(&self.open) {
                        children.push(CalcNode::Formula { formula: formula.clone(), justification: justification.clone(), detour });
                    }
                    self.current = Some(formula.clone());
                }
            }
        }
        if detour {
            self.detour = true;
        }
    }

    /// After a detour: if the current formula equals one the method
    /// reaches later, skip ahead to just after it.
    fn resync(&mut self, store: &KnowledgeStore) -> Committed {
        let Some(cur) = self.current.clone() else { return Committed::Detour };
        let goal = canonical(store, &self.theory, &cur);
        let hit = (self.pc..self.trace.steps.len())
            .find(|&j| self.trace.steps[j].last_formula().is_some_and(|f| canonical(store, &self.theory, f) == goal));
        let Some(j) = hit else { return Committed::Detour };
        let structural: Vec<Effect> = self.trace.steps[self.pc..=j]
            .iter()
            .flat_map(|s| s.effects.iter().filter(|e| !matches!(e, Effect::Formula { .. })).cloned())
            .collect();
        self.apply(&structural, false);
        self.current = Some(cur);
        self.pc = j + 1;
        self.detour = false;
        Committed::Resynced
    }
}
