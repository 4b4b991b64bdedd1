use std::path::PathBuf;

use mawen_core::knowledge::*;
use mawen_core::par::Exec;
use mawen_core::rewrite::{eval_f64, replay, Env, RewriteRule};
use mawen_core::solve::*;
use mawen_core::term::{parse, Signature, Term};

fn store() -> KnowledgeStore {
    load_store(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")).unwrap()
}

fn t(s: &str) -> Term {
    parse(s, &Signature::full()).unwrap()
}

const METHOD: &str = "Optimisation/by_univariate_calculus";

/// Formalisation items of No123a, with the radius replaced by `r`.
fn items(s: &KnowledgeStore, variant: usize, r: i64) -> Vec<(String, Vec<Term>)> {
    let mut items = formalisation_items(s.example("No123a").unwrap(), variant).unwrap();
    for (label, ts) in &mut items {
        if label == "Constants" {
            *ts = vec![Term::eq(Term::var("r"), Term::int(r))];
        }
    }
    items
}

fn start(s: &KnowledgeStore, variant: usize, r: i64, exec: Exec) -> SolveState {
    SolveState::start(s, "No123a", METHOD, &items(s, variant, r), exec).unwrap()
}

fn run_to_end(s: &KnowledgeStore, st: &mut SolveState) -> Vec<Term> {
    while let Proposal::Step { tactic, .. } = st.propose_next() {
        assert_eq!(st.commit_step(s, &tactic).unwrap(), Committed::Proposed);
    }
    st.finish().unwrap()
}

fn value(t: &Term) -> f64 {
    t.as_equation().and_then(|(_, r)| r.as_number()).map(|n| n.to_f64()).unwrap()
}

fn texts(st: &SolveState) -> Vec<String> {
    st.calc.formulas().iter().map(|(f, _)| f.to_string()).collect()
}

#[test]
fn first_proposals_follow_the_method() {
    let s = store();
    let mut st = start(&s, 0, 7, Exec::Sequential);
    match st.propose_next() {
        Proposal::Step { tactic: Tactic::SubProblem { problem }, .. } => assert_eq!(problem, "make/function"),
        other => panic!("{other:?}"),
    }
    let Proposal::Step { tactic, .. } = st.propose_next() else { unreachable!() };
    st.commit_step(&s, &tactic).unwrap();
    match st.propose_next() {
        Proposal::Step { tactic: Tactic::SolveUnivariate { equation, unknown, .. }, .. } => {
            assert_eq!(equation, t("(u/2)^2 + (v/2)^2 = r^2"));
            assert_eq!(unknown, t("v"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn symbolic_chain() {
    let s = store();
    let mut st = start(&s, 0, 7, Exec::Parallel);
    run_to_end(&s, &mut st);
    let lines = texts(&st);
    let pos = |x: &str| lines.iter().position(|l| l == x).unwrap_or_else(|| panic!("missing {x}\n{lines:#?}"));
    let both = pos("L=[v=2*sqrt(r^2-(u/2)^2), v=-2*sqrt(r^2-(u/2)^2)]");
    let kept = pos("L=[v=2*sqrt(r^2-(u/2)^2)]");
    let a_of_u = pos("A(u)=2*u*(2*sqrt(r^2-(u/2)^2))-u^2");
    let d0 = pos("A'(u)=d/du(2*u*(2*sqrt(r^2-(u/2)^2))-u^2)");
    let d1 = pos("A'(u)=d/du(2*u*(2*sqrt(r^2-(u/2)^2)))-d/du(u^2)");
    assert!(both < kept && kept < a_of_u && a_of_u < d0 && d0 + 1 == d1);
    let (_, j) = st.calc.formulas()[d1];
    match j {
        Some(StepJustification::Rule(j)) => assert_eq!(j.rule, "diff_diff"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn replay_is_deterministic_across_modes() {
    let s = store();
    for variant in 0..2 {
        let mut a = start(&s, variant, 7, Exec::Parallel);
        let mut b = start(&s, variant, 7, Exec::Sequential);
        assert_eq!(run_to_end(&s, &mut a), run_to_end(&s, &mut b));
        assert_eq!(serde_json::to_string(&a.calc).unwrap(), serde_json::to_string(&b.calc).unwrap());
    }
}

/// Every rule justification, re-applied to the formula before it,
/// reproduces the formula it justifies.
#[test]
fn justifications_replay() {
    let s = store();
    for variant in 0..2 {
        let mut st = start(&s, variant, 7, Exec::Parallel);
        run_to_end(&s, &mut st);
        let formulas = st.calc.formulas();
        let mut checked = 0;
        for w in formulas.windows(2) {
            let ((before, _), (after, j)) = (w[0], w[1]);
            if let Some(StepJustification::Rule(j)) = j {
                let rule = s.rule(&st.theory, &j.rule).unwrap();
                assert_eq!(replay(rule, before, j).as_ref(), Ok(after), "{}", j.rule);
                checked += 1;
            }
        }
        assert!(checked > 10);
    }
}

#[test]
fn proposals_are_accepted_as_input() {
    let s = store();
    let mut st = start(&s, 0, 7, Exec::Sequential);
    while let Proposal::Step { tactic, formula, .. } = st.propose_next() {
        if let Some(f) = formula {
            assert_eq!(st.check_user_step(&s, &f), StepCheck::Proposed { tactic: tactic.clone() });
        }
        st.commit_step(&s, &tactic).unwrap();
    }
}

#[test]
fn typed_difference_rule_is_accepted() {
    let s = store();
    let mut st = start(&s, 0, 7, Exec::Sequential);
    let derivative = t("A'(u) = d/du(2*u*(2*sqrt(r^2-(u/2)^2))-u^2)");
    while st.current.as_ref() != Some(&derivative) {
        let Proposal::Step { tactic, .. } = st.propose_next() else { panic!("never reached the derivative") };
        st.commit_step(&s, &tactic).unwrap();
    }
    let difference = t("A'(u) = d/du(2*u*(2*sqrt(r^2-(u/2)^2))) - d/du(u^2)");
    let check = st.input_step(&s, &difference).unwrap();
    assert!(check.accepted(), "{check:?}");
    let (_, j) = *st.calc.formulas().last().unwrap();
    match j {
        Some(StepJustification::Rule(j)) => assert_eq!(j.rule, "diff_diff"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unchanged_input_is_no_progress() {
    let s = store();
    let mut st = start(&s, 0, 7, Exec::Sequential);
    for _ in 0..2 {
        let Proposal::Step { tactic, .. } = st.propose_next() else { unreachable!() };
        st.commit_step(&s, &tactic).unwrap();
    }
    let cur = st.current.clone().unwrap();
    match st.check_user_step(&s, &cur) {
        StepCheck::Rejected { reason, .. } => assert_eq!(reason, "no progress"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn wrong_input_is_rejected_with_a_position() {
    let s = store();
    let mut st = start(&s, 0, 7, Exec::Sequential);
    for _ in 0..2 {
        let Proposal::Step { tactic, .. } = st.propose_next() else { unreachable!() };
        st.commit_step(&s, &tactic).unwrap();
    }
    match st.input_step(&s, &t("v = 17")).unwrap() {
        StepCheck::Rejected { position, .. } => assert!(position.is_some()),
        other => panic!("{other:?}"),
    }
}

fn step_rules(s: &KnowledgeStore, theory: &str) -> Vec<RewriteRule> {
    let mut out: Vec<RewriteRule> = Vec::new();
    for set in s.rulesets(theory).filter(|r| r.name != "canon") {
        for r in &set.rules {
            if !out.iter().any(|o| o.name == r.name) {
                out.push(r.clone());
            }
        }
    }
    out
}

/// Two-step derivations are found; three-step ones are not at depth 2.
#[test]
fn bounded_search_depth() {
    let s = store();
    let rules = step_rules(&s, "Diff_App");
    let start = t("2*x + 3 = 7");
    let mut ctx = Env::new();
    ctx.insert("?x".into(), t("x"));
    let canon = |x: &Term| canonical(&s, "Diff_App", x);
    let goal = canon(&t("x = (7-3)/2"));
    let found = search(Exec::Parallel, &rules, &start, &Env::new(), &[ctx.clone()], 2, |x| canon(x) == goal).unwrap();
    assert_eq!(found.len(), 2);
    let far = canon(&t("x = 2"));
    assert!(search(Exec::Parallel, &rules, &start, &Env::new(), &[ctx.clone()], 2, |x| canon(x) == far).is_none());
    assert!(search(Exec::Parallel, &rules, &start, &Env::new(), &[ctx], 4, |x| canon(x) == far).is_some());
}

#[test]
fn filter_drops_only_points_outside() {
    let s = store();
    let mut st = start(&s, 0, 7, Exec::Sequential);
    run_to_end(&s, &mut st);
    // at every u in (0, 2r) the dropped root is negative and the kept one is inside (0, r]
    let dropped = t("-2*sqrt(r^2-(u/2)^2)");
    let kept = t("2*sqrt(r^2-(u/2)^2)");
    for i in 1..100 {
        let u = 14.0 * i as f64 / 100.0;
        let env = [("r".to_string(), 7.0), ("u".to_string(), u)].into_iter().collect();
        assert!(eval_f64(&dropped, &env).unwrap() < 0.0);
        assert!(eval_f64(&kept, &env).unwrap() > 0.0);
    }
}

/// Brute-force maximum of A(u) = 2u·v(u) − u² on a 1e-4 grid.
fn grid_optimum(r: f64) -> (f64, f64) {
    let v = |u: f64| 2.0 * (r * r - u * u / 4.0).max(0.0).sqrt();
    let a = |u: f64| 2.0 * u * v(u) - u * u;
    let n = (2.0 * r / 1e-4) as usize;
    let u = (1..n).map(|i| i as f64 * 1e-4).fold(0.0, |best, u| if a(u) > a(best) { u } else { best });
    (u, v(u))
}

#[test]
fn numeric_optimum_matches_grid() {
    let s = store();
    for r in [3, 5, 7] {
        let (u, v) = grid_optimum(r as f64);
        for variant in 0..2 {
            let mut st = start(&s, variant, r, Exec::Parallel);
            let result = run_to_end(&s, &mut st);
            let get = |name: &str| result.iter().find(|e| e.as_equation().is_some_and(|(l, _)| l.as_var() == Some(name))).map(value).unwrap();
            assert!((get("u") - u).abs() < 1e-2, "r={r} variant={variant}: {result:?}");
            assert!((get("v") - v).abs() < 1e-2, "r={r} variant={variant}: {result:?}");
        }
    }
}

#[test]
fn detour_then_resync() {
    let s = store();
    let mut st = start(&s, 0, 7, Exec::Sequential);
    // enter the sub-problem, then solve the circle equation by hand
    let Proposal::Step { tactic, .. } = st.propose_next() else { unreachable!() };
    st.commit_step(&s, &tactic).unwrap();
    let Proposal::Step { tactic: Tactic::SolveUnivariate { equation, .. }, .. } = st.propose_next() else { unreachable!() };
    st.commit_step(&s, &Tactic::TakeEquation { list: Term::list(vec![equation]), index: 0 }).unwrap();
    assert!(st.detour);
    let check = st.input_step(&s, &t("(v/2)^2 = r^2 - (u/2)^2")).unwrap();
    assert!(check.accepted(), "{check:?}");
    // the method continues from where it would have been
    let rest = run_to_end(&s, &mut st);
    assert_eq!(rest.len(), 2);
}

#[test]
fn finish_requires_termination() {
    let s = store();
    let mut st = start(&s, 0, 7, Exec::Sequential);
    assert_eq!(st.finish(), Err(SolveError::NotTerminated));
    run_to_end(&s, &mut st);
    let Proposal::Finished { values } = st.propose_next() else { panic!() };
    assert_eq!(values.len(), 2);
    assert_eq!(st.commit_step(&s, &Tactic::SwitchToFloat { digits: 3 }), Err(SolveError::Finished));
}

#[test]
fn guard_needs_its_items() {
    let s = store();
    let mut its = items(&s, 0, 7);
    its.retain(|(l, _)| l != "Relate");
    assert!(matches!(SolveState::start(&s, "No123a", METHOD, &its, Exec::Sequential), Err(SolveError::GuardUnsatisfied { .. })));
}
