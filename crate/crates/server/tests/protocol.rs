use std::io::Cursor;
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

use mawen_core::knowledge::{load_store, KnowledgeStore};
use mawen_core::par::Exec;
use mawen_server::*;

fn store() -> KnowledgeStore {
    load_store(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")).unwrap()
}

fn server() -> Server {
    Server::new(store(), Exec::Parallel)
}

fn request(id: u64, method: &str, params: Value) -> String {
    json!({ "id": id, "method": method, "params": params }).to_string()
}

/// Requests for a whole session on `session`: the specification, then
/// every proposal accepted, then finish.
fn session_script(session: &str) -> Vec<(&'static str, Value)> {
    let mut s = vec![
        ("model/input", json!({ "session": session, "field": "Given", "text": "r = 7" })),
        ("model/input", json!({ "session": session, "field": "Find", "text": "A" })),
        ("model/input", json!({ "session": session, "field": "Find", "text": "u, v" })),
        ("model/input", json!({ "session": session, "field": "Relate", "text": "A = 2*u*v - u^2" })),
        ("model/input", json!({ "session": session, "field": "Relate", "text": "(u/2)^2 + (v/2)^2 = r^2" })),
        ("refs/set", json!({ "session": session, "slot": "RTheory", "id": "Diff_App" })),
        ("refs/set", json!({ "session": session, "slot": "RProblem", "id": "univariate_calculus/Optimisation" })),
        ("refs/set", json!({ "session": session, "slot": "RMethod", "id": "Optimisation/by_univariate_calculus" })),
        ("refs/toggle", json!({ "session": session, "slot": "RMethod" })),
        ("model/check", json!({ "session": session })),
        ("postcond/show", json!({ "session": session })),
        ("solve/start", json!({ "session": session })),
    ];
    for _ in 0..40 {
        s.push(("solve/commit", json!({ "session": session })));
    }
    s.push(("solve/finish", json!({ "session": session })));
    s
}

fn full_script() -> Vec<String> {
    let mut lines = vec![
        request(1, "example/list", json!({})),
        request(2, "example/open", json!({ "id": "No123a" })),
        String::new(),
        request(3, "term/render", json!({ "term": "(x+1)/(y-2)" })),
        request(4, "term/navigate", json!({ "term": "a+b", "path": [], "move": "to-first-child" })),
        request(5, "term/outline", json!({ "term": "A = 2*u*v - u^2", "depth": 1 })),
        request(6, "knowledge/lookup", json!({ "symbol": "plus", "level": "school" })),
        request(7, "knowledge/refine", json!({ "problem": "equation", "items": ["sqrt(x) - 3 = 0", "x"] })),
        request(8, "knowledge/outline", json!({ "kind": "problems", "depth": 2 })),
    ];
    for (i, (m, p)) in session_script("s1").into_iter().enumerate() {
        lines.push(request(100 + i as u64, m, p));
    }
    lines.push(request(999, "session/close", json!({ "session": "s1" })));
    lines
}

fn via_stdio(lines: &[String]) -> Vec<String> {
    let s = server();
    let input = lines.join("\n");
    let mut out = Vec::new();
    serve_stdio(&s, Cursor::new(input), &mut out).unwrap();
    String::from_utf8(out).unwrap().lines().map(str::to_string).collect()
}

fn via_websocket(lines: &[String]) -> Vec<String> {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let s = Arc::new(server());
    thread::spawn(move || serve_websocket_on(s, listener));
    let (mut ws, _) = tungstenite::connect(format!("ws://127.0.0.1:{port}")).unwrap();
    let mut out = Vec::new();
    for l in lines.iter().filter(|l| !l.is_empty()) {
        ws.send(tungstenite::Message::text(l.clone())).unwrap();
        out.push(ws.read().unwrap().into_text().unwrap().to_string());
    }
    ws.close(None).ok();
    out
}

#[test]
fn transports_answer_identically() {
    let lines = full_script();
    let stdio = via_stdio(&lines);
    let ws = via_websocket(&lines);
    assert_eq!(stdio.len(), lines.iter().filter(|l| !l.is_empty()).count());
    assert_eq!(stdio, ws);
    // the session really went through solving
    let finish: Value = serde_json::from_str(&stdio[stdio.len() - 2]).unwrap();
    assert_eq!(finish["result"]["phase"], "finished", "{finish}");
    assert_eq!(finish["result"]["values"][0]["linear"], "u=7.36");
}

#[test]
fn every_term_has_both_renderings() {
    let out = via_stdio(&full_script());
    fn walk(v: &Value, bad: &mut usize) {
        match v {
            Value::Object(m) => {
                if m.contains_key("linear") != m.contains_key("pretty") {
                    *bad += 1;
                }
                m.values().for_each(|x| walk(x, bad));
            }
            Value::Array(a) => a.iter().for_each(|x| walk(x, bad)),
            _ => {}
        }
    }
    let mut bad = 0;
    for l in &out {
        walk(&serde_json::from_str(l).unwrap(), &mut bad);
    }
    assert_eq!(bad, 0);
    let render: Value = serde_json::from_str(&out[2]).unwrap();
    assert_eq!(render["result"]["linear"], "(x+1)/(y-2)");
    assert!(render["result"]["pretty"].as_str().unwrap().contains("<mfrac"));
}

fn normalized(reply: &str, session: &str) -> String {
    reply.replace(&format!("\"{session}\""), "\"<session>\"")
}

/// Interleaved sessions each see exactly what a serial replay sees.
#[test]
fn interleaved_sessions_are_isolated() {
    let shared = Arc::new(server());
    let open = |s: &Server| -> String {
        let r: Value = serde_json::from_str(&s.handle(&request(1, "example/open", json!({ "id": "No123a" }))).unwrap()).unwrap();
        r["result"]["session"].as_str().unwrap().to_string()
    };
    let a = open(&shared);
    let b = open(&shared);
    let run = |s: Arc<Server>, sess: String, script: Vec<(&'static str, Value)>| {
        thread::spawn(move || {
            script.into_iter().enumerate().map(|(i, (m, p))| normalized(&s.handle(&request(i as u64, m, p)).unwrap(), &sess)).collect::<Vec<_>>()
        })
    };
    let ta = run(Arc::clone(&shared), a.clone(), session_script(&a));
    let tb = run(Arc::clone(&shared), b.clone(), script_b(&b));
    let (ra, rb) = (ta.join().unwrap(), tb.join().unwrap());

    let serial = |script: fn(&str) -> Vec<(&'static str, Value)>| {
        let s = server();
        let sess = open(&s);
        script(&sess).into_iter().enumerate().map(|(i, (m, p))| normalized(&s.handle(&request(i as u64, m, p)).unwrap(), &sess)).collect::<Vec<_>>()
    };
    assert_eq!(ra, serial(session_script));
    assert_eq!(rb, serial(script_b));
}

/// B diverges from A: a superfluous relation and a different variant.
fn script_b(sess: &str) -> Vec<(&'static str, Value)> {
    vec![
        ("model/input", json!({ "session": sess, "field": "Relate", "text": "u^2 + v^2 = (2*r)^2" })),
        ("model/input", json!({ "session": sess, "field": "Relate", "text": "u/2 = r*sin(alpha)" })),
        ("refs/toggle", json!({ "session": sess, "slot": "RMethod" })),
        ("model/check", json!({ "session": sess })),
    ]
}

fn call(s: &Server, method: &str, params: Value) -> Value {
    serde_json::from_str(&s.handle(&request(7, method, params)).unwrap()).unwrap()
}

fn error_code(v: &Value) -> i64 {
    v["error"]["code"].as_i64().unwrap_or_else(|| panic!("expected an error: {v}"))
}

#[test]
fn envelope_errors() {
    let s = server();
    let r: Value = serde_json::from_str(&s.handle("{not json").unwrap()).unwrap();
    assert_eq!(r["id"], Value::Null);
    assert_eq!(error_code(&r), PARSE_ERROR);
    let r: Value = serde_json::from_str(&s.handle(r#"{"id": 3}"#).unwrap()).unwrap();
    assert_eq!(error_code(&r), INVALID_REQUEST);
    assert_eq!(error_code(&call(&s, "no/such", json!({}))), METHOD_NOT_FOUND);
    assert_eq!(error_code(&call(&s, "example/open", json!({ "nope": 1 }))), INVALID_PARAMS);
    assert_eq!(error_code(&call(&s, "model/check", json!({ "session": "s42" }))), UNKNOWN_SESSION);
    assert!(s.handle("   ").is_none());
    // notifications run but are never answered
    assert!(s.handle(r#"{"method": "example/list"}"#).is_none());
}

#[test]
fn phases_are_enforced_and_failures_are_atomic() {
    let s = server();
    let open = call(&s, "example/open", json!({ "id": "No123a" }));
    let sess = open["result"]["session"].as_str().unwrap().to_string();
    assert_eq!(error_code(&call(&s, "solve/propose", json!({ "session": sess }))), WRONG_PHASE);
    // incomplete model: refused, session still specifying
    let r = call(&s, "solve/start", json!({ "session": sess }));
    assert_eq!(error_code(&r), DOMAIN_ERROR);
    assert!(r["error"]["data"]["missing"].as_array().is_some_and(|m| !m.is_empty()));
    let r = call(&s, "model/input", json!({ "session": sess, "field": "Given", "text": "r = 7" }));
    assert_eq!(r["result"]["feedback"], "Correct");
    let closed = call(&s, "session/close", json!({ "session": sess }));
    assert_eq!(closed["result"]["closed"], sess.as_str());
    assert_eq!(error_code(&call(&s, "model/check", json!({ "session": sess }))), UNKNOWN_SESSION);
}

#[test]
fn session_ids_are_unique() {
    let s = server();
    let ids: Vec<String> =
        (0..5).map(|_| call(&s, "example/open", json!({ "id": "No123a" }))["result"]["session"].as_str().unwrap().to_string()).collect();
    let mut d = ids.clone();
    d.sort();
    d.dedup();
    assert_eq!(d.len(), ids.len());
}

#[test]
fn typed_steps_over_the_wire() {
    let s = server();
    let sess = call(&s, "example/open", json!({ "id": "No123a" }))["result"]["session"].as_str().unwrap().to_string();
    for (m, p) in session_script(&sess).into_iter().take(12) {
        let r = call(&s, m, p);
        assert!(r.get("result").is_some(), "{m}: {r}");
    }
    let r = call(&s, "solve/inputStep", json!({ "session": sess, "formula": "A = 2*u*" }));
    assert_eq!(error_code(&r), DOMAIN_ERROR);
    assert!(r["error"]["data"]["position"].is_number());
    let r = call(&s, "solve/commit", json!({ "session": sess }));
    let next = r["result"]["proposal"]["formula"]["linear"].as_str().unwrap().to_string();
    let r = call(&s, "solve/inputStep", json!({ "session": sess, "formula": next }));
    assert_eq!(r["result"]["check"]["kind"], "proposed", "{r}");
}
