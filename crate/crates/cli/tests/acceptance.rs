//! Acceptance suite: one PASS/FAIL line per criterion. Runs against the
//! built `mawen` binary and the shipped corpus; no web client involved.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path as FsPath, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use mawen_core::knowledge::{load_store, KnowledgeStore, ProblemPattern};
use mawen_core::par::Exec;
use mawen_core::rewrite::{apply_rule, eval_f64, eval_pred, match_term, substitute, Env, RewriteRule, Substitution};
use mawen_core::solve::{formalisation_items, Proposal, SolveState};
use mawen_core::spec::{Field, SpecState};
use mawen_core::term::*;
use mawen_server::Server;

type Outcome = Result<String, String>;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus() -> PathBuf {
    root().join("corpus")
}

fn store() -> KnowledgeStore {
    load_store(&corpus()).unwrap()
}

fn mawen() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mawen"));
    c.arg("--knowledge").arg(corpus());
    c
}

fn t(s: &str) -> Term {
    parse(s, &Signature::full()).unwrap()
}

fn linear(t: &Term) -> String {
    render_linear(t, NotationTable::default_table()).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

// ---------------------------------------------------------------- terms

fn random_term(rng: &mut ChaCha8Rng, depth: usize) -> Term {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..6) {
            0 | 1 => Term::int(rng.gen_range(0..60)),
            2 => Term::constant("pi"),
            _ => Term::var(["a", "b", "r", "u", "v", "x", "y", "alpha"][rng.gen_range(0..8)]),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_term(rng, depth - 1);
    match rng.gen_range(0..12) {
        0..=4 => {
            let op = ["plus", "minus", "times", "div", "pow"][rng.gen_range(0..5)];
            Term::binary(op, sub(rng), sub(rng))
        }
        5 => {
            let op = ["eq", "lt", "le", "and", "implies"][rng.gen_range(0..5)];
            Term::binary(op, sub(rng), sub(rng))
        }
        6 | 7 => Term::unary(["neg", "sqrt", "sin", "cos"][rng.gen_range(0..4)], sub(rng)),
        8 => {
            let n = rng.gen_range(0..3);
            Term::list((0..n).map(|_| sub(rng)).collect())
        }
        9 => Term::binder(BinderKind::Deriv, ["x", "u"][rng.gen_range(0..2)], sub(rng)),
        10 => Term::binder(BinderKind::Forall, ["x", "u'"][rng.gen_range(0..2)], sub(rng)),
        _ => Term::binary("app", Term::var(["A", "f"][rng.gen_range(0..2)]), sub(rng)),
    }
}

fn linear_fidelity() -> Outcome {
    let started = Instant::now();
    let out = mawen().args(["render", "(x+1)/(y-2)", "--linear"]).output().unwrap();
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let printed = String::from_utf8(out.stdout).unwrap();
    ensure(printed == "(x+1)/(y-2)\n", || format!("rendered {printed:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sig = Signature::full();
    for i in 0..1000 {
        let term = random_term(&mut rng, 5);
        let text = linear(&term);
        let back = parse(&text, &sig).map_err(|e| format!("#{i} {text}: {e}"))?;
        ensure(back == term, || format!("#{i} {text} parsed back as {back}"))?;
    }
    let took = within(Duration::from_secs(5), started)?;
    Ok(format!("1000 round-trips, {took:.2?}"))
}

// ---------------------------------------------------------------- transcripts

fn transcript(name: &str) -> Vec<Value> {
    std::fs::read_to_string(root().join("golden").join(name)).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn replays(path: &FsPath) -> Result<(), String> {
    let out = mawen().arg("replay").arg(path).output().unwrap();
    ensure(out.status.success(), || format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr)))
}

fn in_session<'a>(entries: &'a [Value], s: &'a str) -> impl Iterator<Item = &'a Value> {
    entries.iter().filter(move |e| e["args"]["session"] == s)
}

fn spec_replay() -> Outcome {
    let path = root().join("golden/optimisation_spec.jsonl");
    replays(&path)?;
    let entries = transcript("optimisation_spec.jsonl");
    // positive flow: every input and reference Correct, Incomplete -> Correct
    let s1: Vec<&Value> = in_session(&entries, "s1").collect();
    let feedback: Vec<&Value> = s1.iter().filter(|e| e["op"] == "model/input" || e["op"] == "refs/set").map(|e| &e["expected_feedback"]["feedback"]).collect();
    ensure(feedback.len() == 8 && feedback.iter().all(|f| *f == "Correct"), || format!("feedback {feedback:?}"))?;
    let overall: Vec<&Value> = s1.iter().filter(|e| e["op"] == "model/check").map(|e| &e["expected_feedback"]["check"]["overall"]).collect();
    ensure(overall == [&json!("Incomplete"), &json!("Correct")], || format!("overall {overall:?}"))?;
    // False 0<r while r is still unknown
    let first = &s1.iter().find(|e| e["op"] == "model/check").unwrap()["expected_feedback"]["check"];
    let falsified = first["findings"].as_array().unwrap().iter().any(|f| f["False"]["predicate"]["linear"] == "0<r");
    ensure(falsified, || format!("no False 0<r in {first}"))?;
    // negatives
    let s2: Vec<&Value> = in_session(&entries, "s2").collect();
    let superfluous = s2.iter().any(|e| e["args"]["text"] == "u^2 + v^2 = (2*r)^2" && e["expected_feedback"]["feedback"] == "Superfluous");
    ensure(superfluous, || "u^2+v^2=(2r)^2 not Superfluous".into())?;
    let check = &s2.iter().find(|e| e["op"] == "model/check").unwrap()["expected_feedback"]["check"];
    let missing = check["findings"].as_array().unwrap().iter().any(|f| f["Missing"]["labels"] == json!(["AdditionalValues"]));
    ensure(missing, || format!("no Missing AdditionalValues in {check}"))?;
    Ok(format!("{} transcript entries byte-identical", entries.len()))
}

// ---------------------------------------------------------------- variants

const F_II: [(Field, &str); 6] = [
    (Field::Given, "r = 7"),
    (Field::Find, "A"),
    (Field::Find, "alpha"),
    (Field::Relate, "A = 2*u*v - u^2"),
    (Field::Relate, "u/2 = r*sin(alpha)"),
    (Field::Relate, "v/2 = r*cos(alpha)"),
];

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn variant_switching() -> Outcome {
    let s = store();
    let mut f1 = SpecState::new(&s, "No123a").unwrap();
    f1.toggle_reference_checkbox(mawen_core::spec::Slot::RMethod);
    ensure(f1.revealed(&s) == vec![t("{0<..<r}")], || format!("F_I reveals {:?}", f1.revealed(&s)))?;
    let mut baseline = None;
    let perms = permutations(F_II.len());
    for p in &perms {
        let mut st = SpecState::new(&s, "No123a").unwrap();
        for &i in p {
            st.input_item(&s, F_II[i].0, F_II[i].1);
        }
        st.toggle_reference_checkbox(mawen_core::spec::Slot::RMethod);
        let active = st.active_formalisation(&s).name.clone();
        ensure(active == "F_II", || format!("order {p:?}: active {active}"))?;
        let revealed: Vec<String> = st.revealed(&s).iter().map(linear).collect();
        ensure(revealed == ["{0<..<pi/2}"], || format!("order {p:?}: revealed {revealed:?}"))?;
        let check = serde_json::to_string(&st.check_model(&s)).unwrap();
        match &baseline {
            None => baseline = Some(check),
            Some(b) => ensure(*b == check, || format!("order {p:?} changes the check:\n{b}\n{check}"))?,
        }
    }
    Ok(format!("{} input orders agree", perms.len()))
}

// ---------------------------------------------------------------- solving

/// Formulas and rule names of a calculation view, in reading order.
fn flatten(calc: &Value, out: &mut Vec<(String, Option<String>)>) {
    match calc["kind"].as_str() {
        Some("formula") => out.push((
            calc["formula"]["linear"].as_str().unwrap().to_string(),
            calc["justification"]["rule"].as_str().map(str::to_string),
        )),
        Some("sub") => calc["children"].as_array().unwrap().iter().for_each(|c| flatten(c, out)),
        _ => {}
    }
}

fn solve_replay() -> Outcome {
    let path = root().join("golden/optimisation_solve.jsonl");
    replays(&path)?;
    // regenerating twice gives the same bytes
    let dir = std::env::temp_dir().join(format!("mawen-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut runs = Vec::new();
    for i in 0..2 {
        let copy = dir.join(format!("run{i}.jsonl"));
        std::fs::copy(&path, &copy).unwrap();
        let out = mawen().arg("replay").arg("--update").arg(&copy).output().unwrap();
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        runs.push(std::fs::read(&copy).unwrap());
    }
    std::fs::remove_dir_all(&dir).ok();
    ensure(runs[0] == runs[1], || "regenerated transcripts differ".into())?;
    ensure(runs[0] == std::fs::read(&path).unwrap(), || "golden transcript is stale".into())?;

    let entries = transcript("optimisation_solve.jsonl");
    let finish = &entries.iter().find(|e| e["op"] == "solve/finish").unwrap()["expected_feedback"];
    let mut lines = Vec::new();
    flatten(&finish["calc"], &mut lines);
    let pos = |x: &str| lines.iter().position(|(l, _)| l == x).ok_or_else(|| format!("missing line {x}"));
    let both = pos("L=[v=2*sqrt(r^2-(u/2)^2), v=-2*sqrt(r^2-(u/2)^2)]")?;
    let kept = pos("L=[v=2*sqrt(r^2-(u/2)^2)]")?;
    let a_of_u = pos("A(u)=2*u*(2*sqrt(r^2-(u/2)^2))-u^2")?;
    let d0 = pos("A'(u)=d/du(2*u*(2*sqrt(r^2-(u/2)^2))-u^2)")?;
    let d1 = pos("A'(u)=d/du(2*u*(2*sqrt(r^2-(u/2)^2)))-d/du(u^2)")?;
    ensure(both < kept && kept < a_of_u && a_of_u < d0 && d0 + 1 == d1, || format!("out of order: {both} {kept} {a_of_u} {d0} {d1}"))?;
    ensure(lines[d1].1.as_deref() == Some("diff_diff"), || format!("line {d1} justified by {:?}", lines[d1].1))?;
    let values: Vec<&str> = finish["values"].as_array().unwrap().iter().map(|v| v["linear"].as_str().unwrap()).collect();
    Ok(format!("{} lines, stable bytes, result {}", lines.len(), values.join(", ")))
}

fn grid_optimum(r: f64) -> (f64, f64) {
    let v = |u: f64| 2.0 * (r * r - u * u / 4.0).max(0.0).sqrt();
    let a = |u: f64| 2.0 * u * v(u) - u * u;
    let n = (2.0 * r / 1e-4) as usize;
    let u = (1..n).map(|i| i as f64 * 1e-4).fold(0.0, |best, u| if a(u) > a(best) { u } else { best });
    (u, v(u))
}

fn numeric_optimum() -> Outcome {
    let started = Instant::now();
    let s = store();
    let ex = s.example("No123a").unwrap();
    let mut report = Vec::new();
    for r in [3i64, 5, 7] {
        let (gu, gv) = grid_optimum(r as f64);
        let mut items = formalisation_items(ex, 0).unwrap();
        for (label, ts) in &mut items {
            if label == "Constants" {
                *ts = vec![Term::eq(Term::var("r"), Term::int(r))];
            }
        }
        let mut st = SolveState::start(&s, "No123a", "Optimisation/by_univariate_calculus", &items, Exec::default()).map_err(|e| e.to_string())?;
        while let Proposal::Step { tactic, .. } = st.propose_next() {
            st.commit_step(&s, &tactic).map_err(|e| e.to_string())?;
        }
        let values = st.finish().map_err(|e| e.to_string())?;
        let get = |name: &str| {
            values
                .iter()
                .find_map(|e| e.as_equation().filter(|(l, _)| l.as_var() == Some(name)).and_then(|(_, v)| v.as_number()).map(|n| n.to_f64()))
                .ok_or_else(|| format!("r={r}: no value for {name} in {values:?}"))
        };
        let (u, v) = (get("u")?, get("v")?);
        ensure((u - gu).abs() < 1e-2 && (v - gv).abs() < 1e-2, || format!("r={r}: engine u={u} v={v}, grid u={gu:.4} v={gv:.4}"))?;
        report.push(format!("r={r}: u={u} v={v}"));
    }
    let took = within(Duration::from_secs(10), started)?;
    Ok(format!("{}; {took:.2?}", report.join(", ")))
}

// ---------------------------------------------------------------- matching

fn disjoint(paths: Vec<Path>) -> Vec<Path> {
    let mut kept: Vec<Path> = Vec::new();
    for p in paths {
        if !kept.iter().any(|k| p.starts_with(k) || k.starts_with(&p)) {
            kept.push(p);
        }
    }
    kept
}

fn under_binder(t: &Term, p: &Path) -> bool {
    (0..p.len()).any(|n| matches!(subterm(t, &Path(p.indices()[..n].to_vec())).unwrap(), Term::Binder(..)))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn holds(t: &Term, env: &BTreeMap<String, f64>) -> Option<bool> {
    if let Some(items) = t.as_list() {
        let vals: Option<Vec<bool>> = items.iter().map(|i| holds(i, env)).collect();
        return vals.map(|v| v.into_iter().any(|b| b));
    }
    let (l, r) = t.as_equation()?;
    Some(close(eval_f64(l, env)?, eval_f64(r, env)?))
}

/// 100 random instances of `rule`: term rules keep the value; equation
/// rules keep a satisfied equation satisfied (the bare-variable side `w`
/// is solved for first).
fn rule_is_sound(rule: &RewriteRule, pool: &[Term], rng: &mut ChaCha8Rng) -> Result<(), String> {
    let mut ctx = Env::new();
    ctx.insert("?x".into(), Term::var("x"));
    let vars: Vec<String> = rule.lhs.pattern_vars().into_iter().filter(|v| v != "?x").collect();
    let is_eq = rule.lhs.as_equation().is_some();
    let bare: Vec<String> =
        rule.lhs.as_equation().map(|(l, r)| [r, l].iter().filter_map(|x| x.as_var().map(str::to_string)).collect()).unwrap_or_default();
    let (mut points, mut tries) = (0, 0);
    while points < 100 {
        tries += 1;
        ensure(tries < 200_000, || format!("{}: only {points} instances", rule.name))?;
        let solved = (!bare.is_empty()).then(|| bare[rng.gen_range(0..bare.len())].clone());
        let mut sub = Substitution::new();
        sub.insert("?x", Term::var("x"));
        for v in &vars {
            let t = if Some(v) == solved.as_ref() { Term::var("w") } else { pool[rng.gen_range(0..pool.len())].clone() };
            sub.insert(v.clone(), t);
        }
        let lhs = substitute(&sub, &rule.lhs);
        let Ok((rhs, _)) = apply_rule(rule, &lhs, &Path::root(), &ctx) else { continue };
        let mut env: BTreeMap<String, f64> =
            [("x", rng.gen_range(0.3..2.0)), ("y", rng.gen_range(0.3..2.0))].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        if is_eq {
            let (l, r) = lhs.as_equation().unwrap();
            let other = if r.as_var() == Some("w") { l } else { r };
            let Some(w) = eval_f64(other, &env) else { continue };
            env.insert("w".into(), w);
            let (Some(true), Some(after)) = (holds(&lhs, &env), holds(&rhs, &env)) else { continue };
            ensure(after, || format!("{}: {lhs} => {rhs} at {env:?}", rule.name))?;
        } else {
            let (Some(a), Some(b)) = (eval_f64(&lhs, &env), eval_f64(&rhs, &env)) else { continue };
            if !a.is_finite() || !b.is_finite() {
                continue;
            }
            ensure(close(a, b), || format!("{}: {lhs} = {a} but {rhs} = {b} at {env:?}", rule.name))?;
        }
        points += 1;
    }
    Ok(())
}

fn matching() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pairs = 0;
    while pairs < 1000 {
        let term = random_term(&mut rng, 5);
        let paths = all_paths(&term);
        let picks = (0..rng.gen_range(0..4)).map(|_| paths[rng.gen_range(0..paths.len())].clone()).filter(|p| !under_binder(&term, p)).collect();
        let chosen = disjoint(picks);
        let mut pattern = term.clone();
        for (i, p) in chosen.iter().enumerate() {
            pattern = replace_at(&pattern, p, Term::var(format!("?p{i}"))).unwrap();
        }
        let sub = match_term(&pattern, &term).ok_or_else(|| format!("{pattern} does not match {term}"))?;
        ensure(substitute(&sub, &pattern) == term, || format!("{pattern} / {term}: substitution differs"))?;
        pairs += 1;
    }
    let s = store();
    let sig = Signature::full();
    let pool: Vec<Term> = [
        "2", "3", "5", "1/2", "7/3", "0", "1", "y", "2*y + 1", "y^2", "sqrt(y + 1)", "x", "3*x - 1", "x^2 + 1", "sin(x)", "cos(x) + 2", "x*y",
        "sqrt(x^2 + 1)", "-x", "-(y + 2)", "x/3", "x^2",
    ]
    .iter()
    .map(|s| parse(s, &sig).unwrap())
    .collect();
    let rules: Vec<&RewriteRule> = s.theories().flat_map(|th| th.rules.iter()).collect();
    for rule in &rules {
        rule_is_sound(rule, &pool, &mut rng)?;
    }
    Ok(format!("{pairs} match/substitute pairs, {} rules x 100 points", rules.len()))
}

// ---------------------------------------------------------------- refinement

fn refinement() -> Outcome {
    let s = store();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    fn walk<'a>(p: &'a ProblemPattern, out: &mut Vec<&'a ProblemPattern>) {
        out.push(p);
        p.children.iter().for_each(|c| walk(c, out));
    }
    let mut nodes = Vec::new();
    walk(s.problem("equation").unwrap(), &mut nodes);
    let mut compared = 0;
    for i in 0..20 {
        let c: Vec<i64> = (0..3).map(|_| rng.gen_range(1..9)).collect();
        let eq = match i % 5 {
            0 => format!("{}*x + {} = 0", c[0], c[1]),
            1 => format!("{}*x^2 + {}*x - {} = 0", c[0], c[1], c[2]),
            2 => format!("x^3 - {}*x + {} = 0", c[0], c[1]),
            3 => format!("sqrt(x) - {} = 0", c[0]),
            _ => format!("{}*x = {}", c[0], c[1]),
        };
        let items = [t(&eq), t("x")];
        let got = s.refine_problem("equation", &items, &Env::new()).map_err(|e| e.to_string())?;
        ensure(got.len() == nodes.len(), || format!("{eq}: {} candidates for {} nodes", got.len(), nodes.len()))?;
        for (r, p) in got.iter().zip(&nodes) {
            let mut sub = Substitution::new();
            for (tpl, item) in p.model.given.iter().zip(&items) {
                sub.insert(tpl.pattern.to_string(), item.clone());
            }
            for ((w, truth), w2) in r.preconditions.iter().zip(&p.model.where_) {
                let direct = eval_pred(&substitute(&sub, w2), &Env::new());
                ensure(w == w2 && *truth == direct, || format!("{eq}: {w2} at {} is {truth:?}, directly {direct:?}", p.id))?;
                compared += 1;
            }
        }
    }
    Ok(format!("20 equations, {compared} preconditions agree"))
}

// ---------------------------------------------------------------- protocol

fn request(id: usize, method: &str, params: Value) -> String {
    json!({ "id": id, "method": method, "params": params }).to_string()
}

fn session_calls(sess: &str, relate: &[&str]) -> Vec<(&'static str, Value)> {
    let mut calls = vec![
        ("model/input", json!({ "session": sess, "field": "Given", "text": "r = 7" })),
        ("model/input", json!({ "session": sess, "field": "Find", "text": "A" })),
        ("model/input", json!({ "session": sess, "field": "Find", "text": "u, v" })),
    ];
    for r in relate {
        calls.push(("model/input", json!({ "session": sess, "field": "Relate", "text": r })));
    }
    calls.extend([
        ("refs/set", json!({ "session": sess, "slot": "RTheory", "id": "Diff_App" })),
        ("refs/set", json!({ "session": sess, "slot": "RProblem", "id": "univariate_calculus/Optimisation" })),
        ("refs/set", json!({ "session": sess, "slot": "RMethod", "id": "Optimisation/by_univariate_calculus" })),
        ("refs/toggle", json!({ "session": sess, "slot": "RMethod" })),
        ("model/check", json!({ "session": sess })),
        ("postcond/show", json!({ "session": sess })),
        ("solve/start", json!({ "session": sess })),
    ]);
    calls.extend((0..30).map(|_| ("solve/commit", json!({ "session": sess }))));
    calls.push(("solve/finish", json!({ "session": sess })));
    calls
}

fn protocol_script() -> Vec<String> {
    let mut lines = vec![
        request(1, "example/list", json!({})),
        request(2, "example/open", json!({ "id": "No123a" })),
        request(3, "term/render", json!({ "term": "(x+1)/(y-2)" })),
        request(4, "term/navigate", json!({ "term": "a+b", "path": [1], "move": "to-prev-sibling" })),
        request(5, "knowledge/refine", json!({ "problem": "equation", "items": ["2*x + 3 = 0", "x"] })),
        request(6, "no/such", json!({})),
    ];
    let calls = session_calls("s1", &["A = 2*u*v - u^2", "(u/2)^2 + (v/2)^2 = r^2"]);
    lines.extend(calls.into_iter().enumerate().map(|(i, (m, p))| request(100 + i, m, p)));
    lines
}

fn via_stdio(lines: &[String]) -> Result<Vec<String>, String> {
    let mut child = mawen().args(["serve", "--stdio"]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all((lines.join("\n") + "\n").as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    ensure(out.status.success(), || "stdio server failed".into())?;
    Ok(String::from_utf8(out.stdout).unwrap().lines().map(str::to_string).collect())
}

fn via_websocket(lines: &[String]) -> Result<Vec<String>, String> {
    let mut child = mawen().args(["serve", "--port", "0"]).env("RUST_LOG", "info").stderr(Stdio::piped()).spawn().unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut addr = None;
    let mut line = String::new();
    while addr.is_none() && stderr.read_line(&mut line).unwrap() > 0 {
        addr = line.split("ws://").nth(1).map(|a| format!("ws://{}", a.trim()));
        line.clear();
    }
    let result = (|| {
        let addr = addr.ok_or("server never announced its address")?;
        let (mut ws, _) = tungstenite::connect(&addr).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        for l in lines {
            ws.send(tungstenite::Message::text(l.clone())).map_err(|e| e.to_string())?;
            out.push(ws.read().map_err(|e| e.to_string())?.into_text().map_err(|e| e.to_string())?.to_string());
        }
        ws.close(None).ok();
        Ok(out)
    })();
    child.kill().ok();
    child.wait().ok();
    result
}

fn interleaving() -> Result<usize, String> {
    let shared = Arc::new(Server::new(store(), Exec::default()));
    let open = |s: &Server| s.dispatch("example/open", &json!({ "id": "No123a" })).unwrap()["session"].as_str().unwrap().to_string();
    let b_relate = ["u^2 + v^2 = (2*r)^2", "A = 2*u*v - u^2", "(u/2)^2 + (v/2)^2 = r^2"];
    let a_relate = ["A = 2*u*v - u^2", "(u/2)^2 + (v/2)^2 = r^2"];
    let run = |s: &Server, sess: &str, relate: &[&str]| -> Vec<String> {
        session_calls(sess, relate)
            .into_iter()
            .map(|(m, p)| {
                let r = s.dispatch(m, &p).map_err(|e| json!(e));
                serde_json::to_string(&r.unwrap_or_else(|e| e)).unwrap().replace(&format!("\"{sess}\""), "\"<session>\"")
            })
            .collect()
    };
    let (a, b) = (open(&shared), open(&shared));
    let threads: Vec<_> = [(a, a_relate.to_vec()), (b, b_relate.to_vec())]
        .into_iter()
        .map(|(sess, relate)| {
            let s = Arc::clone(&shared);
            thread::spawn(move || run(&s, &sess, &relate))
        })
        .collect();
    let together: Vec<Vec<String>> = threads.into_iter().map(|h| h.join().unwrap()).collect();
    for (got, relate) in together.iter().zip([&a_relate[..], &b_relate[..]]) {
        let alone = Server::new(store(), Exec::Sequential);
        let sess = open(&alone);
        ensure(*got == run(&alone, &sess, relate), || "interleaved session diverged from its serial replay".into())?;
    }
    Ok(together.iter().map(Vec::len).sum())
}

fn protocol() -> Outcome {
    let script = protocol_script();
    let stdio = via_stdio(&script)?;
    let ws = via_websocket(&script)?;
    ensure(stdio.len() == script.len(), || format!("{} replies to {} requests", stdio.len(), script.len()))?;
    ensure(stdio == ws, || {
        let i = stdio.iter().zip(&ws).position(|(a, b)| a != b).unwrap_or(stdio.len().min(ws.len()));
        format!("transports differ at reply {i}")
    })?;
    let finish: Value = serde_json::from_str(stdio.last().unwrap()).unwrap();
    ensure(finish["result"]["phase"] == "finished", || format!("session did not finish: {finish}"))?;
    let replies = interleaving()?;
    Ok(format!("{} replies identical over stdio and WebSocket; {replies} interleaved replies isolated", stdio.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("linear notation fidelity", linear_fidelity),
        ("specification replay", spec_replay),
        ("variant switching", variant_switching),
        ("solve replay", solve_replay),
        ("numeric optimum", numeric_optimum),
        ("matching properties", matching),
        ("refinement", refinement),
        ("protocol", protocol),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", started.elapsed()),
            Err(why) => {
                println!("FAIL {name}: {why} [{:.2?}]", started.elapsed());
                failed.push(name);
            }
        }
    }
    let _ = panic::take_hook();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
