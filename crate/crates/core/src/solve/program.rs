//! Running a method program ahead of time into a trace of steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::calc::StepJustification;
use super::exec::{instantiate, run_tactic, Ctx, Outcome, TacticError};
use crate::knowledge::{Statement, Tactic};
use crate::rewrite::{eval_pred, Env, Truth};
use crate::term::Term;

/// Upper bound on the number of steps a program may take.
pub const MAX_STEPS: usize = 1000;

/// A structural change to the calculation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Effect {
    OpenSub {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        problem: Option<String>,
        collapsed: bool,
    },
    Formula {
        formula: Term,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        justification: Option<StepJustification>,
    },
    CloseSub,
    SetFloat {
        digits: u8,
    },
}

/// One tactic application the method proposes, with everything it adds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub tactic: Tactic,
    pub effects: Vec<Effect>,
}

impl TraceStep {
    /// The formula the learner sees last after this step.
    pub fn last_formula(&self) -> Option<&Term> {
        self.effects.iter().rev().find_map(|e| match e {
            Effect::Formula { formula, .. } => Some(formula),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub result: Vec<Term>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("step {step} ({tactic}): {error}")]
    Tactic { step: usize, tactic: String, error: TacticError },
    #[error("template: {0}")]
    Template(String),
    #[error("condition `{0}` is undecided")]
    Undecided(Term),
    #[error("loop did not reach `{0}`")]
    Diverged(Term),
    #[error("program exceeds {MAX_STEPS} steps")]
    TooLong,
    #[error("program ended without a result")]
    NoResult,
}

struct Interp<'a> {
    base: Ctx<'a>,
    env: Env,
    float: Option<u8>,
    levels: Vec<Option<Term>>,
    steps: Vec<TraceStep>,
    result: Option<Vec<Term>>,
}

/// Runs `program` with the guard bindings in `env`.
pub fn run_program(ctx: &Ctx, program: &[Statement], env: Env) -> Result<Trace, ProgramError> {
    let mut it = Interp { base: *ctx, env, float: ctx.float, levels: vec![None], steps: Vec::new(), result: None };
    it.block(program)?;
    let result = it.result.ok_or(ProgramError::NoResult)?;
    Ok(Trace { steps: it.steps, result })
}

impl Interp<'_> {
    fn block(&mut self, body: &[Statement]) -> Result<(), ProgramError> {
        for s in body {
            if self.result.is_some() {
                break;
            }
            self.statement(s)?;
        }
        Ok(())
    }

    fn current(&self) -> Option<&Term> {
        self.levels.last().and_then(Option::as_ref)
    }

    fn statement(&mut self, s: &Statement) -> Result<(), ProgramError> {
        if self.steps.len() > MAX_STEPS {
            return Err(ProgramError::TooLong);
        }
        match s {
            Statement::Let { name, value } => {
                let v = self.inst(value)?;
                self.env.insert(name.clone(), v);
            }
            Statement::Step { tactic, bind } => {
                if let Some(c) = self.current().cloned() {
                    self.env.insert("?current".into(), c);
                }
                let tactic = tactic.map_terms(|t| self.inst(t).map_err(|e| e.to_string())).map_err(ProgramError::Template)?;
                let ctx = Ctx { env: &self.env, float: self.float, ..self.base };
                let out = run_tactic(&ctx, &tactic, self.current()).map_err(|error| ProgramError::Tactic {
                    step: self.steps.len(),
                    tactic: tactic.to_string(),
                    error,
                })?;
                if let Some(d) = out.float {
                    self.float = Some(d);
                }
                if let Some(b) = bind {
                    self.env.insert(b.clone(), out.value.clone());
                }
                *self.levels.last_mut().unwrap() = Some(out.formula.clone());
                self.steps.extend(split_steps(tactic, &out));
            }
            Statement::Sub { problem, collapsed, body } => {
                let tactic = Tactic::SubProblem { problem: problem.clone() };
                let label = tactic.to_string();
                self.steps.push(TraceStep {
                    tactic,
                    effects: vec![Effect::OpenSub { label, problem: Some(problem.clone()), collapsed: *collapsed }],
                });
                let open_at = self.steps.len();
                self.levels.push(self.current().cloned());
                self.block(body)?;
                let inner = self.levels.pop().flatten();
                // the sub's last formula is its result, shown one level up
                let has_body = self.steps.len() > open_at;
                let last = self.steps.last_mut().unwrap();
                let hoisted = if has_body { pop_last_formula(&mut last.effects) } else { None };
                last.effects.push(Effect::CloseSub);
                if let Some(f) = hoisted {
                    last.effects.push(f);
                }
                if inner.is_some() {
                    *self.levels.last_mut().unwrap() = inner;
                }
            }
            Statement::Branch { cond, then, otherwise } => match eval_pred(cond, &self.env) {
                Truth::True => self.block(then)?,
                Truth::False => self.block(otherwise)?,
                Truth::Undecided => return Err(ProgramError::Undecided(cond.clone())),
            },
            Statement::Repeat { body, until, max } => {
                let mut done = false;
                for _ in 0..*max {
                    self.block(body)?;
                    if self.result.is_some() || eval_pred(until, &self.env) == Truth::True {
                        done = true;
                        break;
                    }
                }
                if !done {
                    return Err(ProgramError::Diverged(until.clone()));
                }
            }
            Statement::Result { values } => {
                let vs = values.iter().map(|v| self.inst(v)).collect::<Result<Vec<_>, _>>()?;
                self.result = Some(vs);
            }
        }
        Ok(())
    }

    fn inst(&self, t: &Term) -> Result<Term, ProgramError> {
        instantiate(t, &self.env).map_err(ProgramError::Template)
    }
}

fn pop_last_formula(effects: &mut Vec<Effect>) -> Option<Effect> {
    let i = effects.iter().rposition(|e| matches!(e, Effect::Formula { .. }))?;
    Some(effects.remove(i))
}

/// Trace steps for one tactic. An expanded sub-derivation becomes one step
/// per rewrite so that each of its lines can be proposed (and typed in)
/// separately; its last formula is shown one level up.
fn split_steps(tactic: Tactic, out: &Outcome) -> Vec<TraceStep> {
    let sub = match &out.sub {
        Some(sub) if !sub.collapsed && !sub.formulas.is_empty() => sub,
        _ => return vec![TraceStep { effects: effects_of(out), tactic }],
    };
    let as_tactic = |j: &Option<StepJustification>, fallback: &Tactic| match j {
        Some(StepJustification::Rule(j)) => Tactic::Rewrite { rule: j.rule.clone(), path: j.path.clone() },
        _ => fallback.clone(),
    };
    let mut first = Vec::new();
    if let Some(d) = out.float {
        first.push(Effect::SetFloat { digits: d });
    }
    first.push(Effect::OpenSub { label: sub.label.clone(), problem: None, collapsed: false });
    let (f0, j0) = &sub.formulas[0];
    first.push(Effect::Formula { formula: f0.clone(), justification: j0.clone() });
    let mut steps = vec![TraceStep { tactic: tactic.clone(), effects: first }];
    for (f, j) in &sub.formulas[1..] {
        steps.push(TraceStep { tactic: as_tactic(j, &tactic), effects: vec![Effect::Formula { formula: f.clone(), justification: j.clone() }] });
    }
    let mut close = vec![Effect::CloseSub];
    let mut tail: Vec<(Term, StepJustification)> = out.steps.clone();
    tail.push((out.formula.clone(), out.justification.clone()));
    for (i, (f, j)) in tail.into_iter().enumerate() {
        let j = Some(j);
        let mut effects = if i == 0 { std::mem::take(&mut close) } else { Vec::new() };
        effects.push(Effect::Formula { formula: f, justification: j.clone() });
        steps.push(TraceStep { tactic: as_tactic(&j, &tactic), effects });
    }
    steps
}

/// The calculation changes a tactic outcome makes.
pub fn effects_of(out: &Outcome) -> Vec<Effect> {
    let mut effects = Vec::new();
    if let Some(d) = out.float {
        effects.push(Effect::SetFloat { digits: d });
    }
    if let Some(sub) = &out.sub {
        effects.push(Effect::OpenSub { label: sub.label.clone(), problem: None, collapsed: sub.collapsed });
        for (f, j) in &sub.formulas {
            effects.push(Effect::Formula { formula: f.clone(), justification: j.clone() });
        }
        effects.push(Effect::CloseSub);
    }
    for (f, j) in &out.steps {
        effects.push(Effect::Formula { formula: f.clone(), justification: Some(j.clone()) });
    }
    effects.push(Effect::Formula { formula: out.formula.clone(), justification: Some(out.justification.clone()) });
    effects
}
