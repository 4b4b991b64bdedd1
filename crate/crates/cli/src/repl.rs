//! Line-oriented front end over the same protocol methods the web client
//! uses. Output is plain ASCII: one fact per line, terms in linear form.

use std::io::{self, BufRead, Write};

use serde_json::{json, Value};

use mawen_server::Server;

const HELP: &str = "\
commands:
  open ID                 open an example (starts a new session)
  given|find|relate TEXT  add a model item
  ref SLOT ID             set RTheory / RProblem / RMethod
  toggle SLOT             toggle a reference checkbox
  check                   check the whole model
  post                    show the postcondition
  start                   start solving
  propose                 show the next proposed step
  accept                  commit the proposed step
  step FORMULA            type the next formula yourself
  finish                  finish the calculation
  show                    show the model or the calculation
  render TERM             render a term in linear form
  outline TERM            one-level outline of a term
  lookup SYMBOL [LEVEL]   explanations of a symbol
  help | quit";

/// Replaces everything outside printable ASCII.
fn ascii(s: &str) -> String {
    s.chars().map(|c| if c == '\n' || (' '..='~').contains(&c) { c } else { '?' }).collect()
}

fn linear(v: &Value) -> String {
    v["linear"].as_str().map(str::to_string).unwrap_or_else(|| v.to_string())
}

fn feedback(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Object(m) => match m.iter().next() {
            Some((k, Value::Object(inner))) if k == "False" => format!("False: {}", linear(&inner["predicate"])),
            Some((k, Value::Object(inner))) if k == "SyntaxError" => {
                format!("SyntaxError at {}: {}", inner["position"], inner["message"].as_str().unwrap_or(""))
            }
            Some((k, Value::Object(inner))) if k == "Missing" => format!("Missing: {}", inner["labels"]),
            _ => v.to_string(),
        },
        _ => v.to_string(),
    }
}

fn model_lines(m: &Value) -> Vec<String> {
    let mut out = vec![format!("example {} ({})", m["example"].as_str().unwrap_or(""), m["active"].as_str().unwrap_or(""))];
    for i in m["items"].as_array().into_iter().flatten() {
        out.push(format!("  {:<7} {}  [{}]", i["field"].as_str().unwrap_or(""), i["text"].as_str().unwrap_or(""), feedback(&i["feedback"])));
    }
    for i in m["revealed"].as_array().into_iter().flatten() {
        out.push(format!("  {:<7} {}  [revealed]", i["field"].as_str().unwrap_or(""), linear(&i["term"])));
    }
    for (slot, r) in m["references"].as_object().into_iter().flatten() {
        let mark = if r["checked"] == true { "x" } else { " " };
        out.push(format!("  [{mark}] {slot} {}  [{}]", r["id"].as_str().unwrap_or("-"), feedback(&r["feedback"])));
    }
    out
}

fn calc_lines(n: &Value, indent: usize, out: &mut Vec<String>) {
    let pad = "  ".repeat(indent);
    match n["kind"].as_str() {
        Some("formula") => {
            if let Some(j) = n.get("justification") {
                let text = j["text"].as_str().map(str::to_string).unwrap_or_else(|| format!("{} at {}", j["rule"].as_str().unwrap_or("?"), j["path"]));
                out.push(format!("{pad}  = {{ {text} }}"));
            }
            out.push(format!("{pad}{}", linear(&n["formula"])));
        }
        Some("sub") => {
            out.push(format!("{pad}[{}]{}", n["label"].as_str().unwrap_or(""), if n["collapsed"] == true { " (collapsed)" } else { "" }));
            for c in n["children"].as_array().into_iter().flatten() {
                calc_lines(c, indent + 1, out);
            }
        }
        Some("result") => {
            let vals: Vec<String> = n["values"].as_array().into_iter().flatten().map(linear).collect();
            out.push(format!("{pad}result: {}", vals.join(", ")));
        }
        _ => out.push(format!("{pad}{n}")),
    }
}

fn solve_lines(v: &Value) -> Vec<String> {
    let mut out = Vec::new();
    if !v["calc"].is_null() {
        calc_lines(&v["calc"], 0, &mut out);
    }
    if let Some(c) = v.get("check") {
        out.push(format!("check: {}", c["kind"].as_str().unwrap_or("?")));
        if let Some(r) = c.get("reason") {
            out.push(format!("  {}", r.as_str().unwrap_or("")));
        }
    }
    match v["proposal"]["kind"].as_str() {
        Some("step") => out.push(format!("next: {}", v["proposal"]["text"].as_str().unwrap_or(""))),
        Some("finished") => out.push("next: finish".into()),
        _ => {}
    }
    out
}

struct Repl<'a> {
    server: &'a Server,
    session: Option<String>,
    /// Latest calculation, once solving has started.
    calc: Option<Value>,
}

impl Repl<'_> {
    fn call(&self, method: &str, params: Value) -> Result<Value, String> {
        self.server.dispatch(method, &params).map_err(|e| match e.data {
            Some(d) => format!("error {}: {} {d}", e.code, e.message),
            None => format!("error {}: {}", e.code, e.message),
        })
    }

    fn session(&self) -> Result<&str, String> {
        self.session.as_deref().ok_or_else(|| "no example open (use `open ID`)".to_string())
    }

    fn with_session(&mut self, method: &str, mut params: Value) -> Result<Value, String> {
        params["session"] = json!(self.session()?);
        let r = self.call(method, params)?;
        if let Some(c) = r.get("calc") {
            self.calc = Some(c.clone());
        }
        Ok(r)
    }

    fn open(&mut self, id: &str) -> Result<Vec<String>, String> {
        let r = self.call("example/open", json!({ "id": id }))?;
        self.session = r["session"].as_str().map(str::to_string);
        self.calc = None;
        let m = &r["template"];
        let mut out = vec![format!("session {}", self.session()?)];
        if let Some(st) = m["statement"].as_str() {
            out.extend(st.lines().map(|l| format!("  {l}")));
        }
        for (field, labels) in m["labels"].as_object().into_iter().flatten() {
            let labels: Vec<&str> = labels.as_array().into_iter().flatten().filter_map(Value::as_str).collect();
            out.push(format!("  {field}: {}", labels.join(", ")));
        }
        Ok(out)
    }

    fn command(&mut self, line: &str) -> Result<Vec<String>, String> {
        let (cmd, rest) = line.split_once(char::is_whitespace).map(|(c, r)| (c, r.trim())).unwrap_or((line, ""));
        let need = |what: &str| if rest.is_empty() { Err(format!("usage: {cmd} {what}")) } else { Ok(()) };
        match cmd {
            "help" | "?" => Ok(HELP.lines().map(str::to_string).collect()),
            "open" => {
                need("ID")?;
                self.open(rest)
            }
            "given" | "find" | "relate" => {
                need("TEXT")?;
                let field = format!("{}{}", cmd[..1].to_uppercase(), &cmd[1..]);
                let r = self.with_session("model/input", json!({ "field": field, "text": rest }))?;
                Ok(vec![feedback(&r["feedback"])])
            }
            "ref" => {
                let (slot, id) = rest.split_once(' ').ok_or("usage: ref SLOT ID")?;
                let r = self.with_session("refs/set", json!({ "slot": slot, "id": id.trim() }))?;
                Ok(vec![feedback(&r["feedback"])])
            }
            "toggle" => {
                need("SLOT")?;
                let r = self.with_session("refs/toggle", json!({ "slot": rest }))?;
                Ok(model_lines(&r["model"]))
            }
            "check" => {
                let r = self.with_session("model/check", json!({}))?;
                let c = &r["check"];
                let mut out = model_lines(&r["model"]);
                for w in c["where"].as_array().into_iter().flatten() {
                    out.push(format!("  where {}: {}", linear(&w["predicate"]), w["holds"]));
                }
                out.push(format!("overall: {}", feedback(&c["overall"])));
                Ok(out)
            }
            "post" => Ok(vec![linear(&self.with_session("postcond/show", json!({}))?["postcondition"])]),
            "start" => {
                Ok(solve_lines(&self.with_session("solve/start", json!({}))?))
            }
            "propose" => Ok(solve_lines(&self.with_session("solve/propose", json!({}))?).into_iter().rev().take(1).collect()),
            "accept" => {
                let r = self.with_session("solve/commit", json!({}))?;
                let mut out = Vec::new();
                out.push(format!("{}: {}", r["committed"].as_str().unwrap_or("committed"), r["text"].as_str().unwrap_or("")));
                out.push(format!("current: {}", linear(&r["current"])));
                out.extend(solve_lines(&json!({ "proposal": r["proposal"] })));
                Ok(out)
            }
            "step" => {
                need("FORMULA")?;
                let r = self.with_session("solve/inputStep", json!({ "formula": rest }))?;
                let mut out = solve_lines(&json!({ "check": r["check"], "proposal": r["proposal"] }));
                out.insert(0, format!("current: {}", linear(&r["current"])));
                Ok(out)
            }
            "finish" => {
                let r = self.with_session("solve/finish", json!({}))?;
                let vals: Vec<String> = r["values"].as_array().into_iter().flatten().map(linear).collect();
                Ok(vec![format!("result: {}", vals.join(", "))])
            }
            "show" => {
                if let Some(calc) = &self.calc {
                    Ok(solve_lines(&json!({ "calc": calc })))
                } else {
                    Ok(model_lines(&self.with_session("model/check", json!({}))?["model"]))
                }
            }
            "render" => {
                need("TERM")?;
                Ok(vec![linear(&self.call("term/render", json!({ "term": rest }))?)])
            }
            "outline" => {
                need("TERM")?;
                let r = self.call("term/outline", json!({ "term": rest, "depth": 1 }))?;
                let o = &r["outline"];
                let mut out = vec![o["text"].as_str().unwrap_or("").to_string()];
                for c in o["children"].as_array().into_iter().flatten() {
                    out.push(format!("  {} {}", c["path"], c["text"].as_str().unwrap_or("")));
                }
                Ok(out)
            }
            "lookup" => {
                need("SYMBOL [LEVEL]")?;
                let (symbol, level) = rest.split_once(' ').map(|(s, l)| (s, l.trim())).unwrap_or((rest, "school"));
                let r = self.call("knowledge/lookup", json!({ "symbol": symbol, "level": level }))?;
                let entries: Vec<String> = r["entries"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .map(|e| e["text"].as_str().map(str::to_string).unwrap_or_else(|| e.to_string()))
                    .collect();
                Ok(if entries.is_empty() { vec!["(nothing)".into()] } else { entries })
            }
            other => Err(format!("unknown command `{other}` (try `help`)")),
        }
    }
}

pub fn run(server: &Server, input: impl BufRead, mut out: impl Write, example: Option<&str>) -> io::Result<()> {
    let mut repl = Repl { server, session: None, calc: None };
    if let Some(id) = example {
        match repl.open(id) {
            Ok(lines) => lines.iter().try_for_each(|l| writeln!(out, "{}", ascii(l)))?,
            Err(e) => writeln!(out, "{}", ascii(&e))?,
        }
    }
    write!(out, "> ")?;
    out.flush()?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line == "quit" || line == "exit" {
            break;
        }
        if !line.is_empty() {
            let lines = repl.command(line).unwrap_or_else(|e| vec![e]);
            for l in lines {
                writeln!(out, "{}", ascii(&l))?;
            }
        }
        write!(out, "> ")?;
        out.flush()?;
    }
    writeln!(out)?;
    Ok(())
}
