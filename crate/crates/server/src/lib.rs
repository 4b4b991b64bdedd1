//! Session protocol: line-delimited JSON requests and responses, served
//! over stdio or WebSocket. Both transports feed [`Server::handle`], so
//! they answer identically.

mod transport;
pub mod views;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mawen_core::knowledge::{Collection, KnowledgeStore, Tactic};
use mawen_core::par::Exec;
use mawen_core::rewrite::Env;
use mawen_core::solve::{describe, Proposal, SolveState};
use mawen_core::spec::{instantiate_postcondition, Field, Slot, SpecState};
use mawen_core::term::{navigate, outline, parse, Cursor, Move, Path, Signature, Term};

pub use transport::{serve_stdio, serve_websocket, serve_websocket_on};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const WRONG_PHASE: i64 = 1001;
pub const UNKNOWN_SESSION: i64 = 1002;
pub const DOMAIN_ERROR: i64 = 1003;

/// Environment variable naming the knowledge directory.
pub const KNOWLEDGE_DIR_VAR: &str = "MAWEN_KNOWLEDGE_DIR";

/// The knowledge directory: `$MAWEN_KNOWLEDGE_DIR`, else `./corpus`.
pub fn knowledge_dir() -> PathBuf {
    std::env::var_os(KNOWLEDGE_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("corpus"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        RpcError { code, message: message.into(), data: None }
    }

    fn with_data(mut self, data: Value) -> Self {
        self.data = Some(data);
        self
    }
}

type Reply = Result<Value, RpcError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Specifying,
    Solving,
    Finished,
}

#[derive(Clone, Debug)]
struct Session {
    phase: Phase,
    spec: SpecState,
    solve: Option<SolveState>,
    depth: usize,
}

/// Shared server state; cheap to clone handles via `Arc`.
pub struct Server {
    store: Arc<KnowledgeStore>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    exec: Exec,
}

#[derive(Deserialize)]
struct Envelope {
    #[serde(default)]
    id: Option<Value>,
    method: String,
    #[serde(default)]
    params: Value,
}

fn params<T: DeserializeOwned>(p: &Value) -> Result<T, RpcError> {
    let p = if p.is_null() { json!({}) } else { p.clone() };
    serde_json::from_value(p).map_err(|e| RpcError::new(INVALID_PARAMS, e.to_string()))
}

#[derive(Deserialize)]
struct SessionParams {
    session: String,
}

fn parse_term(text: &str, sig: &Signature) -> Result<Term, RpcError> {
    parse(text, sig).map_err(|e| {
        RpcError::new(DOMAIN_ERROR, format!("syntax error: {}", e.message)).with_data(json!({ "position": e.position }))
    })
}

fn domain(e: impl std::fmt::Display) -> RpcError {
    RpcError::new(DOMAIN_ERROR, e.to_string())
}

impl Server {
    pub fn new(store: KnowledgeStore, exec: Exec) -> Self {
        Server { store: Arc::new(store), sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1), exec }
    }

    pub fn store(&self) -> &KnowledgeStore {
        &self.store
    }

    /// Handles one line (stdio) or message (WebSocket). Returns the
    /// serialized response; `None` for blank input and notifications.
    pub fn handle(&self, text: &str) -> Option<String> {
        if text.trim().is_empty() {
            return None;
        }
        let response = match serde_json::from_str::<Value>(text) {
            Err(e) => json!({ "id": null, "error": RpcError::new(PARSE_ERROR, e.to_string()) }),
            Ok(v) => match serde_json::from_value::<Envelope>(v.clone()) {
                Err(e) => {
                    let id = v.get("id").cloned().unwrap_or(Value::Null);
                    json!({ "id": id, "error": RpcError::new(INVALID_REQUEST, e.to_string()) })
                }
                Ok(env) => {
                    let reply = self.dispatch(&env.method, &env.params);
                    let id = env.id?;
                    match reply {
                        Ok(result) => json!({ "id": id, "result": result }),
                        Err(error) => json!({ "id": id, "error": error }),
                    }
                }
            },
        };
        Some(response.to_string())
    }

    /// Runs one method. A failing method leaves its session unchanged.
    pub fn dispatch(&self, method: &str, p: &Value) -> Reply {
        log::debug!("{method} {p}");
        match method {
            "example/list" => self.example_list(),
            "example/open" => self.example_open(p),
            "term/render" => self.term_render(p),
            "term/navigate" => self.term_navigate(p),
            "term/outline" => self.term_outline(p),
            "knowledge/lookup" => self.knowledge_lookup(p),
            "knowledge/refine" => self.knowledge_refine(p),
            "knowledge/outline" => self.knowledge_outline(p),
            "session/close" => {
                let SessionParams { session } = params(p)?;
                match self.sessions.lock().unwrap().remove(&session) {
                    Some(_) => Ok(json!({ "closed": session })),
                    None => Err(RpcError::new(UNKNOWN_SESSION, format!("unknown session `{session}`"))),
                }
            }
            "model/input" | "model/check" | "refs/set" | "refs/toggle" | "postcond/show" | "solve/start" | "solve/propose"
            | "solve/commit" | "solve/inputStep" | "solve/finish" => self.in_session(method, p),
            other => Err(RpcError::new(METHOD_NOT_FOUND, format!("unknown method `{other}`"))),
        }
    }

    fn in_session(&self, method: &str, p: &Value) -> Reply {
        let SessionParams { session } = params(p)?;
        let handle = self
            .sessions
            .lock()
            .unwrap()
            .get(&session)
            .cloned()
            .ok_or_else(|| RpcError::new(UNKNOWN_SESSION, format!("unknown session `{session}`")))?;
        // requests of one session run one at a time, in arrival order
        let mut guard = handle.lock().unwrap();
        let mut work = guard.clone();
        let reply = self.session_method(&mut work, method, p)?;
        *guard = work;
        Ok(reply)
    }

    fn session_method(&self, s: &mut Session, method: &str, p: &Value) -> Reply {
        let store = &*self.store;
        let need = |phase: Phase| {
            if s.phase == phase {
                Ok(())
            } else {
                Err(RpcError::new(WRONG_PHASE, format!("`{method}` needs phase {phase:?}, session is {:?}", s.phase)))
            }
        };
        match method {
            "model/input" => {
                need(Phase::Specifying)?;
                #[derive(Deserialize)]
                struct P {
                    field: Field,
                    text: String,
                }
                let P { field, text } = params(p)?;
                let fb = s.spec.input_item(store, field, &text);
                Ok(json!({ "feedback": views::feedback(&fb), "model": views::model(store, &s.spec) }))
            }
            "model/check" => {
                let c = s.spec.check_model(store);
                Ok(json!({ "check": views::check(&c), "model": views::model(store, &s.spec) }))
            }
            "refs/set" => {
                need(Phase::Specifying)?;
                #[derive(Deserialize)]
                struct P {
                    slot: Slot,
                    id: String,
                }
                let P { slot, id } = params(p)?;
                let fb = s.spec.set_reference(store, slot, &id);
                Ok(json!({ "feedback": views::feedback(&fb), "model": views::model(store, &s.spec) }))
            }
            "refs/toggle" => {
                need(Phase::Specifying)?;
                #[derive(Deserialize)]
                struct P {
                    slot: Slot,
                }
                let P { slot } = params(p)?;
                s.spec.toggle_reference_checkbox(slot);
                Ok(json!({ "model": views::model(store, &s.spec) }))
            }
            "postcond/show" => {
                let ex = store.example(&s.spec.example).expect("session example exists");
                let problem = store.problem(&ex.problem).ok_or_else(|| domain(format!("unknown problem `{}`", ex.problem)))?;
                let template = problem.postcondition.as_ref().ok_or_else(|| domain("the problem has no post-condition"))?;
                let post = instantiate_postcondition(template, s.spec.active_formalisation(store)).map_err(domain)?;
                Ok(json!({ "postcondition": views::term(&post) }))
            }
            "solve/start" => {
                need(Phase::Specifying)?;
                #[derive(Deserialize)]
                struct P {
                    #[serde(default)]
                    depth: Option<usize>,
                }
                let P { depth } = params(p)?;
                let mut st = s.spec.start_solve(store, self.exec).map_err(|e| {
                    let data = match &e {
                        mawen_core::solve::SolveError::GuardUnsatisfied { missing } => json!({ "missing": missing }),
                        _ => Value::Null,
                    };
                    domain(&e).with_data(data)
                })?;
                if let Some(d) = depth {
                    s.depth = d;
                }
                st.depth = s.depth;
                s.solve = Some(st);
                s.phase = Phase::Solving;
                Ok(self.solve_view(s, json!({})))
            }
            "solve/propose" => {
                need(Phase::Solving)?;
                let st = s.solve.as_ref().unwrap();
                Ok(json!({ "proposal": views::proposal(&st.propose_next()) }))
            }
            "solve/commit" => {
                need(Phase::Solving)?;
                #[derive(Deserialize)]
                struct P {
                    #[serde(default)]
                    tactic: Option<Tactic>,
                }
                let P { tactic } = params(p)?;
                let st = s.solve.as_mut().unwrap();
                let tactic = match tactic {
                    Some(t) => t,
                    None => match st.propose_next() {
                        Proposal::Step { tactic, .. } => tactic,
                        Proposal::Finished { .. } => return Err(domain("nothing left to commit; call solve/finish")),
                    },
                };
                let committed = st.commit_step(store, &tactic).map_err(domain)?;
                let text = describe(&tactic);
                Ok(self.solve_view(s, json!({ "committed": committed, "tactic": tactic, "text": text })))
            }
            "solve/inputStep" => {
                need(Phase::Solving)?;
                #[derive(Deserialize)]
                struct P {
                    formula: String,
                }
                let P { formula } = params(p)?;
                let st = s.solve.as_mut().unwrap();
                let sig = store.signature(&st.theory).cloned().unwrap_or_else(Signature::full);
                let t = parse_term(&formula, &sig)?;
                let check = st.input_step(store, &t).map_err(domain)?;
                Ok(self.solve_view(s, json!({ "check": views::step_check(&check) })))
            }
            "solve/finish" => {
                need(Phase::Solving)?;
                let values = s.solve.as_mut().unwrap().finish().map_err(domain)?;
                s.phase = Phase::Finished;
                Ok(self.solve_view(s, json!({ "values": views::terms(&values) })))
            }
            _ => unreachable!("routed by dispatch"),
        }
    }

    fn solve_view(&self, s: &Session, mut extra: Value) -> Value {
        let st = s.solve.as_ref().unwrap();
        extra["phase"] = json!(s.phase);
        extra["calc"] = views::calc(&st.calc);
        extra["current"] = st.current.as_ref().map(views::term).unwrap_or(Value::Null);
        extra["proposal"] = views::proposal(&st.propose_next());
        extra
    }

    fn example_list(&self) -> Reply {
        let list: Vec<Value> = self
            .store
            .examples()
            .map(|e| json!({ "id": e.id, "statement": e.statement, "problem": e.problem, "methods": e.methods }))
            .collect();
        Ok(json!({ "examples": list }))
    }

    fn example_open(&self, p: &Value) -> Reply {
        #[derive(Deserialize)]
        struct P {
            id: String,
        }
        let P { id } = params(p)?;
        let spec = SpecState::new(&self.store, &id).map_err(domain)?;
        let session = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let template = views::model(&self.store, &spec);
        let s = Session { phase: Phase::Specifying, spec, solve: None, depth: mawen_core::solve::DEFAULT_STEP_DEPTH };
        self.sessions.lock().unwrap().insert(session.clone(), Arc::new(Mutex::new(s)));
        Ok(json!({ "session": session, "store_version": self.store.version().to_string(), "template": template }))
    }

    fn signature_for(&self, theory: Option<&str>) -> Result<Signature, RpcError> {
        match theory {
            None => Ok(Signature::full()),
            Some(t) => self.store.signature(t).cloned().ok_or_else(|| domain(format!("unknown theory `{t}`"))),
        }
    }

    fn term_render(&self, p: &Value) -> Reply {
        #[derive(Deserialize)]
        struct P {
            term: String,
            #[serde(default)]
            theory: Option<String>,
        }
        let P { term, theory } = params(p)?;
        let t = parse_term(&term, &self.signature_for(theory.as_deref())?)?;
        Ok(views::term(&t))
    }

    fn term_navigate(&self, p: &Value) -> Reply {
        #[derive(Deserialize)]
        struct P {
            term: String,
            #[serde(default)]
            path: Path,
            #[serde(rename = "move")]
            mv: String,
        }
        let P { term, path, mv } = params(p)?;
        let t = parse_term(&term, &Signature::full())?;
        let mv: Move = mv.parse().map_err(|e: String| RpcError::new(INVALID_PARAMS, e))?;
        let c = Cursor::with(t, path, Default::default()).map_err(|e| RpcError::new(INVALID_PARAMS, e.to_string()))?;
        let moved = navigate(&c, mv);
        Ok(json!({ "path": moved.cursor.at, "boundary": moved.boundary, "focus": views::term(moved.cursor.focus()) }))
    }

    fn term_outline(&self, p: &Value) -> Reply {
        #[derive(Deserialize)]
        struct P {
            term: String,
            #[serde(default = "one")]
            depth: usize,
        }
        fn one() -> usize {
            1
        }
        let P { term, depth } = params(p)?;
        let t = parse_term(&term, &Signature::full())?;
        Ok(views::outline(&outline(&t, depth)))
    }

    fn knowledge_lookup(&self, p: &Value) -> Reply {
        #[derive(Deserialize)]
        struct P {
            symbol: String,
            level: String,
        }
        let P { symbol, level } = params(p)?;
        Ok(json!({ "entries": self.store.lookup_semantics(&symbol, &level) }))
    }

    fn knowledge_refine(&self, p: &Value) -> Reply {
        #[derive(Deserialize)]
        struct P {
            problem: String,
            items: Vec<String>,
            #[serde(default)]
            env: Env,
        }
        let P { problem, items, env } = params(p)?;
        let theory = self.store.problem(&problem).map(|p| p.theory.clone());
        let sig = self.signature_for(theory.as_deref()).unwrap_or_else(|_| Signature::full());
        let items = items.iter().map(|i| parse_term(i, &sig)).collect::<Result<Vec<_>, _>>()?;
        let refined = self.store.refine_problem(&problem, &items, &env).map_err(domain)?;
        let out: Vec<Value> = refined
            .iter()
            .map(|r| {
                json!({
                    "id": r.id,
                    "all_true": r.all_true(),
                    "preconditions": r.preconditions.iter().map(|(t, v)| json!({ "predicate": views::term(t), "value": v })).collect::<Vec<_>>(),
                })
            })
            .collect();
        Ok(json!({ "candidates": out }))
    }

    fn knowledge_outline(&self, p: &Value) -> Reply {
        #[derive(Deserialize)]
        struct P {
            kind: Collection,
            #[serde(default)]
            depth: usize,
        }
        let P { kind, depth } = params(p)?;
        Ok(json!({ "outline": self.store.outline_store(kind, depth) }))
    }
}
