use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;

use mawen_core::knowledge::load_store;
use mawen_core::rewrite::{apply_rule, eval_f64, eval_pred, match_term, normalize, substitute, Env, RewriteRule, Substitution, Truth, DEFAULT_FUEL};
use mawen_core::term::*;

fn leaf() -> impl Strategy<Value = Term> {
    prop_oneof![
        (0i64..60).prop_map(Term::int),
        prop::sample::select(vec!["a", "b", "r", "u", "v", "x", "y", "alpha"]).prop_map(Term::var),
        Just(Term::constant("pi")),
    ]
}

fn term() -> impl Strategy<Value = Term> {
    leaf().prop_recursive(5, 40, 3, |inner| {
        prop_oneof![
            4 => (prop::sample::select(vec!["plus", "minus", "times", "div", "pow"]), inner.clone(), inner.clone())
                .prop_map(|(op, a, b)| Term::binary(op, a, b)),
            1 => (prop::sample::select(vec!["eq", "lt", "le", "and", "implies"]), inner.clone(), inner.clone())
                .prop_map(|(op, a, b)| Term::binary(op, a, b)),
            2 => (prop::sample::select(vec!["neg", "sqrt", "sin", "cos"]), inner.clone()).prop_map(|(op, a)| Term::unary(op, a)),
            1 => prop::collection::vec(inner.clone(), 0..3).prop_map(Term::list),
            1 => (prop::sample::select(vec!["x", "u"]), inner.clone()).prop_map(|(x, b)| Term::binder(BinderKind::Deriv, x, b)),
            1 => (prop::sample::select(vec!["x", "u'"]), inner.clone()).prop_map(|(x, b)| Term::binder(BinderKind::Forall, x, b)),
            1 => (prop::sample::select(vec!["A", "f"]), inner).prop_map(|(f, a)| Term::binary("app", Term::var(f), a)),
        ]
    })
}

fn linear(t: &Term) -> String {
    render_linear(t, NotationTable::default_table()).unwrap()
}

/// Replaces the subterms at `paths` (pairwise non-nested) by fresh
/// pattern variables.
fn abstract_at(t: &Term, paths: &[Path]) -> Term {
    let mut out = t.clone();
    for (i, p) in paths.iter().enumerate() {
        out = replace_at(&out, p, Term::var(format!("?p{i}"))).unwrap();
    }
    out
}

fn disjoint(paths: Vec<Path>) -> Vec<Path> {
    let mut kept: Vec<Path> = Vec::new();
    for p in paths {
        if !kept.iter().any(|k| p.starts_with(k) || k.starts_with(&p)) {
            kept.push(p);
        }
    }
    kept
}

fn no_binders_above(t: &Term, p: &Path) -> bool {
    (0..p.len()).all(|n| !matches!(subterm(t, &Path(p.indices()[..n].to_vec())).unwrap(), Term::Binder(..)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1200))]

    #[test]
    fn linear_round_trip(t in term()) {
        let text = linear(&t);
        let back = parse(&text, &Signature::full()).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(back, t, "{}", text);
    }

    #[test]
    fn pretty_covers_every_leaf(t in term()) {
        let markup = render_pretty(&t).unwrap();
        let leaves = markup.matches("<mn data-path").count() + markup.matches("<mi data-path").count();
        prop_assert_eq!(leaves, t.leaf_count(), "{}", markup);
    }

    #[test]
    fn match_then_substitute(t in term(), picks in prop::collection::vec(any::<prop::sample::Index>(), 0..4)) {
        let paths = all_paths(&t);
        let chosen = disjoint(picks.iter().map(|i| i.get(&paths).clone()).filter(|p| no_binders_above(&t, p)).collect());
        let pattern = abstract_at(&t, &chosen);
        let s = match_term(&pattern, &t).ok_or_else(|| TestCaseError::fail("no match"))?;
        prop_assert_eq!(s.len(), chosen.len());
        prop_assert_eq!(substitute(&s, &pattern), t);
    }

    #[test]
    fn nonlinear_patterns_need_equal_parts(a in term(), b in term()) {
        let p = Term::binary("plus", Term::var("?q"), Term::var("?q"));
        prop_assert_eq!(match_term(&p, &Term::binary("plus", a.clone(), b.clone())).is_some(), a == b);
    }

    #[test]
    fn navigation_laws(t in term(), pick in any::<prop::sample::Index>()) {
        let paths = all_paths(&t);
        let p = pick.get(&paths).clone();
        let sub = subterm(&t, &p).unwrap().clone();
        prop_assert_eq!(replace_at(&t, &p, sub.clone()).unwrap(), t.clone());
        let c = Cursor::with(t.clone(), p.clone(), Default::default()).unwrap();
        if sub.child_count() > 0 {
            let down = navigate(&c, Move::ToFirstChild);
            prop_assert_eq!(&down.cursor.at, &p.child(0));
            prop_assert_eq!(navigate(&down.cursor, Move::ToParent).cursor.at, p.clone());
        }
        if p.is_root() {
            let up = navigate(&c, Move::ToParent);
            prop_assert!(up.boundary);
            prop_assert_eq!(up.cursor.at, p);
        }
    }

    #[test]
    fn outline_grows_with_depth(t in term(), d in 0usize..6) {
        prop_assert_eq!(outline(&t, 0).len(), 1);
        prop_assert!(outline(&t, d).len() <= outline(&t, d + 1).len());
        let brute = all_paths(&t).iter().filter(|p| p.len() <= d).count();
        prop_assert_eq!(outline(&t, d).len(), brute);
    }
}

fn shipped() -> mawen_core::knowledge::KnowledgeStore {
    load_store(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn normal_forms_are_fixed_points(t in term()) {
        let s = shipped();
        for name in ["canon", "simplify", "arith"] {
            let set = s.ruleset("Diff_App", name).unwrap();
            if let Ok(n) = normalize(set, &t, DEFAULT_FUEL) {
                prop_assert_eq!(normalize(set, &n, DEFAULT_FUEL).unwrap(), n.clone(), "{}", name);
            }
        }
    }
}

/// Candidate bindings for rule variables: numbers, expressions without x,
/// and expressions in x.
fn candidates() -> Vec<Term> {
    let sig = Signature::full();
    [
        "2", "3", "5", "1/2", "7/3", "0", "1", "y", "2*y + 1", "y^2", "sqrt(y + 1)", "x", "3*x - 1", "x^2 + 1", "sin(x)", "cos(x) + 2",
        "x*y", "sqrt(x^2 + 1)", "-x", "-(y + 2)", "x/3", "x^2",
    ]
    .iter()
    .map(|s| parse(s, &sig).unwrap())
    .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Whether `t` holds numerically at `env`: equations compare both sides,
/// lists hold when any element holds.
fn holds(t: &Term, env: &BTreeMap<String, f64>) -> Option<bool> {
    if let Some(items) = t.as_list() {
        let vals: Option<Vec<bool>> = items.iter().map(|i| holds(i, env)).collect();
        return vals.map(|v| v.into_iter().any(|b| b));
    }
    let (l, r) = t.as_equation()?;
    Some(close(eval_f64(l, env)?, eval_f64(r, env)?))
}

/// Every shipped rule is sound at 100 random instances: term rules keep
/// the value, equation rules keep a satisfied equation satisfied.
#[test]
fn shipped_rules_are_sound() {
    use rand::{Rng, SeedableRng};
    let s = shipped();
    let pool = candidates();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut rules: Vec<RewriteRule> = Vec::new();
    for th in s.theories() {
        rules.extend(th.rules.iter().cloned());
    }
    assert!(rules.len() > 40);
    let mut ctx = Env::new();
    ctx.insert("?x".into(), Term::var("x"));
    for rule in &rules {
        let vars: Vec<String> = rule.lhs.pattern_vars().into_iter().filter(|v| v != "?x").collect();
        let is_eq = rule.lhs.as_equation().is_some();
        // the side of an equation rule that is a bare variable takes the
        // value that makes the equation true
        let bare: Vec<String> =
            rule.lhs.as_equation().map(|(l, r)| [r, l].iter().filter_map(|x| x.as_var().map(str::to_string)).collect()).unwrap_or_default();
        let mut points = 0;
        let mut tries = 0;
        while points < 100 {
            tries += 1;
            assert!(tries < 200_000, "{}: could not instantiate ({points} points)", rule.name);
            let solved = (!bare.is_empty()).then(|| bare[rng.gen_range(0..bare.len())].clone());
            let mut sub = Substitution::new();
            sub.insert("?x", Term::var("x"));
            for v in &vars {
                let t = if Some(v) == solved.as_ref() { Term::var("w") } else { pool[rng.gen_range(0..pool.len())].clone() };
                sub.insert(v.clone(), t);
            }
            let lhs = substitute(&sub, &rule.lhs);
            let Ok((rhs, _)) = apply_rule(rule, &lhs, &Path::root(), &ctx) else { continue };
            let mut env: BTreeMap<String, f64> = [("x", rng.gen_range(0.3..2.0)), ("y", rng.gen_range(0.3..2.0))]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
            if is_eq {
                let (l, r) = lhs.as_equation().unwrap();
                let other = if r.as_var() == Some("w") { l } else { r };
                let Some(w) = eval_f64(other, &env) else { continue };
                env.insert("w".into(), w);
                let (Some(true), Some(after)) = (holds(&lhs, &env), holds(&rhs, &env)) else { continue };
                assert!(after, "{}: {} => {} at {:?}", rule.name, lhs, rhs, env);
            } else {
                let (Some(a), Some(b)) = (eval_f64(&lhs, &env), eval_f64(&rhs, &env)) else { continue };
                if !a.is_finite() || !b.is_finite() {
                    continue;
                }
                assert!(close(a, b), "{}: {} = {} but {} = {} at {:?}", rule.name, lhs, a, rhs, b, env);
            }
            points += 1;
        }
    }
}

/// Conditions are honoured: a rule never fires when one is false.
#[test]
fn rule_conditions_block() {
    let s = shipped();
    let r = s.rule("Diff_App", "pow_zero").unwrap();
    let zero = Term::binary("pow", Term::int(0), Term::int(0));
    assert!(apply_rule(r, &zero, &Path::root(), &Env::new()).is_err());
    for c in &r.conditions {
        let mut sub = Substitution::new();
        sub.insert("?a", Term::int(0));
        assert_eq!(eval_pred(&substitute(&sub, c), &Env::new()), Truth::False);
    }
}
