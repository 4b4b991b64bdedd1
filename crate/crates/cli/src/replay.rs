//! Transcripts: one JSON object per line, `{"op", "args",
//! "expected_feedback"}`; `expected_feedback` is the method's result, or
//! `{"error": ...}` when it fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use similar::TextDiff;

use mawen_server::Server;

#[derive(Serialize, Deserialize)]
struct Entry {
    op: String,
    #[serde(default)]
    args: Value,
    #[serde(default)]
    expected_feedback: Value,
}

pub fn respond(server: &Server, op: &str, args: &Value) -> Value {
    match server.dispatch(op, args) {
        Ok(v) => v,
        Err(e) => json!({ "error": e }),
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values serialize") + "\n"
}

pub fn run(server: &Server, path: &Path, update: bool) -> Result<(), ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(1)
    })?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut entry: Entry = serde_json::from_str(line).map_err(|e| {
            eprintln!("{}:{}: {e}", path.display(), n + 1);
            ExitCode::from(1)
        })?;
        let actual = respond(server, &entry.op, &entry.args);
        if update {
            entry.expected_feedback = actual;
            out.push(serde_json::to_string(&entry).expect("entries serialize"));
        } else if actual != entry.expected_feedback {
            let (want, got) = (pretty(&entry.expected_feedback), pretty(&actual));
            let diff = TextDiff::from_lines(&want, &got);
            println!("{}:{}: `{}` diverged", path.display(), n + 1, entry.op);
            print!("{}", diff.unified_diff().context_radius(3).header("expected", "actual"));
            return Err(ExitCode::from(1));
        }
    }
    if update {
        fs::write(path, out.join("\n") + "\n").map_err(|e| {
            eprintln!("{}: {e}", path.display());
            ExitCode::from(1)
        })?;
        println!("updated {} ({} entries)", path.display(), out.len());
    } else {
        println!("ok: {}", path.display());
    }
    Ok(())
}
