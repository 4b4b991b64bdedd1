use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path as FsPath;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::model::*;
use crate::rewrite::{eval_pred, match_term, Env, RewriteRule, RuleSet, Truth};
use crate::term::{Signature, Term};

/// Where a knowledge item came from; used to position diagnostics.
#[derive(Clone, Debug)]
struct Source {
    file: String,
    text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LoadErrorKind {
    #[error("cannot read: {message}")]
    Io { message: String },
    #[error("{message}")]
    Json { message: String },
    #[error("unsupported format_version {found:?} (expected {FORMAT_VERSION})")]
    FormatVersion { found: Option<u64> },
    #[error("cycle in imports: {}", cycle.join(" -> "))]
    CycleInImports { cycle: Vec<String> },
    #[error("duplicate {what} `{id}`")]
    Duplicate { what: String, id: String },
    #[error("{what} `{id}` does not exist")]
    Dangling { what: String, id: String },
    #[error("operator `{op}` used in {context} is not declared in theory `{theory}` or its imports")]
    UndeclaredOperator { op: String, context: String, theory: String },
    #[error("{message}")]
    Rule { message: String },
    #[error("child `{child}` does not extend the id of its parent `{parent}`")]
    ChildPrefix { parent: String, child: String },
    #[error("example `{id}` has no formalisation")]
    NoFormalisation { id: String },
    #[error("{message}")]
    Program { message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
pub struct LoadError {
    pub file: String,
    pub line: Option<usize>,
    #[serde(flatten)]
    pub kind: LoadErrorKind,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.file, l, self.kind),
            None => write!(f, "{}: {}", self.file, self.kind),
        }
    }
}

/// All problems found while loading; never empty.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[error("{} error(s) loading knowledge", errors.len())]
pub struct LoadReport {
    pub errors: Vec<LoadError>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown {what} `{id}`")]
pub struct UnknownId {
    pub what: &'static str,
    pub id: String,
}

/// The three knowledge collections plus examples, validated and
/// immutable after construction.
#[derive(Clone, Debug)]
pub struct KnowledgeStore {
    theories: BTreeMap<String, Theory>,
    signatures: BTreeMap<String, Signature>,
    rulesets: BTreeMap<String, BTreeMap<String, RuleSet>>,
    problems: Vec<ProblemPattern>,
    methods: Vec<Method>,
    examples: BTreeMap<String, Example>,
    version: u64,
}

const DIRS: [&str; 4] = ["theories", "problems", "methods", "examples"];

/// Reads `theories/`, `problems/`, `methods/` and `examples/` under `root`
/// (missing subdirectories count as empty).
pub fn load_store(root: &FsPath) -> Result<KnowledgeStore, LoadReport> {
    let mut b = Builder::default();
    for dir in DIRS {
        let d = root.join(dir);
        let Ok(rd) = std::fs::read_dir(&d) else { continue };
        let mut files: Vec<_> = rd.filter_map(Result::ok).map(|e| e.path()).filter(|p| p.extension().is_some_and(|e| e == "json")).collect();
        files.sort();
        for f in files {
            let name = format!("{dir}/{}", f.file_name().unwrap().to_string_lossy());
            match std::fs::read_to_string(&f) {
                Ok(text) => b.add_file(dir, name, text),
                Err(e) => b.error(&name, None, LoadErrorKind::Io { message: e.to_string() }),
            }
        }
    }
    b.finish()
}

impl KnowledgeStore {
    /// Builds a store from in-memory documents; each is `(kind, name,
    /// json-text)` with kind one of the directory names.
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> Result<Self, LoadReport> {
        let mut b = Builder::default();
        for (kind, name, text) in docs {
            b.add_file(kind, name.to_string(), text.to_string());
        }
        b.finish()
    }

    pub fn empty() -> Self {
        Builder::default().finish().expect("empty store is valid")
    }

    /// Content hash; sessions pin the version they started with.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn theory(&self, name: &str) -> Option<&Theory> {
        self.theories.get(name)
    }

    pub fn theories(&self) -> impl Iterator<Item = &Theory> {
        self.theories.values()
    }

    /// Effective signature: the theory's own declarations, those of all
    /// its ancestors, and the built-ins.
    pub fn signature(&self, theory: &str) -> Option<&Signature> {
        self.signatures.get(theory)
    }

    /// Rule sets visible from `theory` (own first, then ancestors).
    pub fn ruleset(&self, theory: &str, name: &str) -> Option<&RuleSet> {
        self.rulesets.get(theory)?.get(name)
    }

    pub fn rulesets(&self, theory: &str) -> impl Iterator<Item = &RuleSet> {
        self.rulesets.get(theory).into_iter().flat_map(|m| m.values())
    }

    /// A rule visible from `theory`, by name: from its rule sets first,
    /// then from the rule lists of the theory and its ancestors.
    pub fn rule(&self, theory: &str, name: &str) -> Option<&RewriteRule> {
        if let Some(r) = self.rulesets(theory).find_map(|s| s.get(name)) {
            return Some(r);
        }
        std::iter::once(theory.to_string())
            .chain(self.ancestors(theory))
            .filter_map(|t| self.theories.get(&t))
            .find_map(|th| th.rules.iter().find(|r| r.name == name))
    }

    /// Is `ancestor` equal to or (transitively) imported by `theory`?
    pub fn imports(&self, theory: &str, ancestor: &str) -> bool {
        theory == ancestor || self.ancestors(theory).contains(ancestor)
    }

    pub fn ancestors(&self, theory: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![theory.to_string()];
        while let Some(t) = stack.pop() {
            if let Some(th) = self.theories.get(&t) {
                for i in &th.imports {
                    if out.insert(i.clone()) {
                        stack.push(i.clone());
                    }
                }
            }
        }
        out
    }

    pub fn problem_roots(&self) -> &[ProblemPattern] {
        &self.problems
    }

    pub fn method_roots(&self) -> &[Method] {
        &self.methods
    }

    pub fn problem(&self, id: &str) -> Option<&ProblemPattern> {
        fn find<'a>(ps: &'a [ProblemPattern], id: &str) -> Option<&'a ProblemPattern> {
            ps.iter().find_map(|p| if p.id == id { Some(p) } else { find(&p.children, id) })
        }
        find(&self.problems, id)
    }

    pub fn method(&self, id: &str) -> Option<&Method> {
        fn find<'a>(ms: &'a [Method], id: &str) -> Option<&'a Method> {
            ms.iter().find_map(|m| if m.id == id { Some(m) } else { find(&m.children, id) })
        }
        find(&self.methods, id)
    }

    pub fn all_problems(&self) -> Vec<&ProblemPattern> {
        fn walk<'a>(ps: &'a [ProblemPattern], out: &mut Vec<&'a ProblemPattern>) {
            for p in ps {
                out.push(p);
                walk(&p.children, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.problems, &mut out);
        out
    }

    pub fn all_methods(&self) -> Vec<&Method> {
        fn walk<'a>(ms: &'a [Method], out: &mut Vec<&'a Method>) {
            for m in ms {
                out.push(m);
                walk(&m.children, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.methods, &mut out);
        out
    }

    pub fn example(&self, id: &str) -> Option<&Example> {
        self.examples.get(id)
    }

    pub fn examples(&self) -> impl Iterator<Item = &Example> {
        self.examples.values()
    }

    /// Topological order: every theory after all of its imports.
    pub fn theory_order(&self) -> Vec<String> {
        fn visit(store: &KnowledgeStore, t: &str, seen: &mut BTreeSet<String>, out: &mut Vec<String>) {
            if !seen.insert(t.to_string()) {
                return;
            }
            if let Some(th) = store.theories.get(t) {
                let mut imports = th.imports.clone();
                imports.sort();
                for i in &imports {
                    visit(store, i, seen, out);
                }
            }
            out.push(t.to_string());
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in self.theories.keys() {
            visit(self, t, &mut seen, &mut out);
        }
        out
    }

    /// Explanations for `symbol` at `level` from the theory that declares
    /// it; empty when the symbol or level is unknown.
    pub fn lookup_semantics(&self, symbol: &str, level: &str) -> Vec<Explanation> {
        self.theory_order()
            .iter()
            .filter_map(|t| self.theories.get(t))
            .find(|th| th.signature.iter().any(|d| d.op.as_str() == symbol) || th.definitions.contains_key(symbol))
            .and_then(|th| th.definitions.get(symbol))
            .map(|es| es.iter().filter(|e| e.level == level).cloned().collect())
            .unwrap_or_default()
    }

    /// Walks the problem subtree under `start` in preorder and evaluates
    /// each node's preconditions against `items` (bound positionally to the
    /// node's `given` templates) and `env`.
    pub fn refine_problem(&self, start: &str, items: &[Term], env: &Env) -> Result<Vec<Refinement>, UnknownId> {
        let root = self.problem(start).ok_or_else(|| UnknownId { what: "problem", id: start.to_string() })?;
        let mut out = Vec::new();
        fn walk(p: &ProblemPattern, items: &[Term], env: &Env, out: &mut Vec<Refinement>) {
            let mut local = env.clone();
            for (tpl, item) in p.model.given.iter().zip(items) {
                if let Some(s) = match_term(&tpl.pattern, item) {
                    local.extend(s.iter().map(|(k, v)| (k.clone(), v.clone())));
                }
            }
            let preconditions = p.model.where_.iter().map(|w| (w.clone(), eval_pred(w, &local))).collect();
            out.push(Refinement { id: p.id.clone(), preconditions });
            for c in &p.children {
                walk(c, items, env, out);
            }
        }
        walk(root, items, env, &mut out);
        Ok(out)
    }

    pub fn outline_store(&self, kind: Collection, depth: usize) -> Vec<StoreOutline> {
        match kind {
            Collection::Problems => self.problems.iter().map(|p| outline_problem(p, 0, depth)).collect(),
            Collection::Methods => self.methods.iter().map(|m| outline_method(m, 0, depth)).collect(),
            Collection::Theories => {
                let imported: BTreeSet<&String> = self.theories.values().flat_map(|t| &t.imports).collect();
                self.theories
                    .keys()
                    .filter(|n| !imported.contains(n))
                    .map(|n| self.outline_theory(n, 0, depth))
                    .collect()
            }
        }
    }

    fn outline_theory(&self, name: &str, level: usize, depth: usize) -> StoreOutline {
        let imports = self.theories.get(name).map(|t| t.imports.clone()).unwrap_or_default();
        StoreOutline {
            id: name.to_string(),
            child_count: imports.len(),
            children: if level < depth { imports.iter().map(|i| self.outline_theory(i, level + 1, depth)).collect() } else { Vec::new() },
        }
    }
}

fn outline_problem(p: &ProblemPattern, level: usize, depth: usize) -> StoreOutline {
    StoreOutline {
        id: p.id.clone(),
        child_count: p.children.len(),
        children: if level < depth { p.children.iter().map(|c| outline_problem(c, level + 1, depth)).collect() } else { Vec::new() },
    }
}

fn outline_method(m: &Method, level: usize, depth: usize) -> StoreOutline {
    StoreOutline {
        id: m.id.clone(),
        child_count: m.children.len(),
        children: if level < depth { m.children.iter().map(|c| outline_method(c, level + 1, depth)).collect() } else { Vec::new() },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Collection {
    Theories,
    Problems,
    Methods,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StoreOutline {
    pub id: String,
    pub child_count: usize,
    pub children: Vec<StoreOutline>,
}

impl StoreOutline {
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(StoreOutline::count).sum::<usize>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Refinement {
    pub id: String,
    pub preconditions: Vec<(Term, Truth)>,
}

impl Refinement {
    pub fn all_true(&self) -> bool {
        self.preconditions.iter().all(|(_, t)| *t == Truth::True)
    }
}

#[derive(Default)]
struct Builder {
    sources: Vec<Source>,
    theories: Vec<(usize, Theory)>,
    problems: Vec<(usize, ProblemPattern)>,
    methods: Vec<(usize, Method)>,
    examples: Vec<(usize, Example)>,
    errors: Vec<LoadError>,
}

/// 1-based line of the first occurrence of `needle`.
fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.find(needle).map(|i| text[..i].matches('\n').count() + 1)
}

impl Builder {
    fn error(&mut self, file: &str, line: Option<usize>, kind: LoadErrorKind) {
        self.errors.push(LoadError { file: file.to_string(), line, kind });
    }

    fn error_at(&mut self, src: usize, needle: &str, kind: LoadErrorKind) {
        let s = &self.sources[src];
        let line = line_of(&s.text, &format!("\"{needle}\"")).or_else(|| line_of(&s.text, needle));
        let file = s.file.clone();
        self.error(&file, line, kind);
    }

    fn parse_doc<T: DeserializeOwned>(&mut self, src: usize) -> Option<T> {
        let s = &self.sources[src];
        let file = s.file.clone();
        let mut value: serde_json::Value = match serde_json::from_str(&s.text) {
            Ok(v) => v,
            Err(e) => {
                self.error(&file, Some(e.line()), LoadErrorKind::Json { message: e.to_string() });
                return None;
            }
        };
        let version = value.as_object_mut().and_then(|o| o.remove("format_version")).and_then(|v| v.as_u64());
        if version != Some(FORMAT_VERSION as u64) {
            self.error(&file, Some(1), LoadErrorKind::FormatVersion { found: version });
            return None;
        }
        // re-parse from text so error positions refer to the file
        match serde_json::from_value::<T>(value) {
            Ok(t) => Some(t),
            Err(e) => {
                let line = serde_json::from_str::<T>(&s.text).err().map(|e2| e2.line()).filter(|l| *l > 0);
                self.error(&file, line, LoadErrorKind::Json { message: e.to_string() });
                None
            }
        }
    }

    fn add_file(&mut self, kind: &str, file: String, text: String) {
        self.sources.push(Source { file, text });
        let src = self.sources.len() - 1;
        match kind {
            "theories" => {
                if let Some(t) = self.parse_doc::<Theory>(src) {
                    self.theories.push((src, t));
                }
            }
            "problems" => {
                if let Some(p) = self.parse_doc::<ProblemPattern>(src) {
                    self.problems.push((src, p));
                }
            }
            "methods" => {
                if let Some(m) = self.parse_doc::<Method>(src) {
                    self.methods.push((src, m));
                }
            }
            "examples" => {
                if let Some(e) = self.parse_doc::<Example>(src) {
                    self.examples.push((src, e));
                }
            }
            other => {
                let file = self.sources[src].file.clone();
                self.error(&file, None, LoadErrorKind::Io { message: format!("unknown collection `{other}`") })
            }
        }
    }

    fn finish(mut self) -> Result<KnowledgeStore, LoadReport> {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for s in &self.sources {
            s.file.hash(&mut hasher);
            s.text.hash(&mut hasher);
        }
        let version = hasher.finish();

        // theories: uniqueness, imports, cycles
        let mut theories: BTreeMap<String, Theory> = BTreeMap::new();
        let mut theory_src: BTreeMap<String, usize> = BTreeMap::new();
        for (src, t) in std::mem::take(&mut self.theories) {
            if theories.contains_key(&t.name) {
                self.error_at(src, &t.name, LoadErrorKind::Duplicate { what: "theory".into(), id: t.name.clone() });
                continue;
            }
            theory_src.insert(t.name.clone(), src);
            theories.insert(t.name.clone(), t);
        }
        for (name, t) in &theories {
            for i in &t.imports {
                if !theories.contains_key(i) {
                    let src = theory_src[name];
                    self.error_at(src, i, LoadErrorKind::Dangling { what: "imported theory".into(), id: i.clone() });
                }
            }
        }
        if let Some(cycle) = find_cycle(&theories) {
            let src = theory_src[&cycle[0]];
            let first = cycle[0].clone();
            self.error_at(src, &first, LoadErrorKind::CycleInImports { cycle });
            return Err(LoadReport { errors: self.errors });
        }

        // effective signatures in topological order
        let order = {
            let tmp = KnowledgeStore {
                theories: theories.clone(),
                signatures: BTreeMap::new(),
                rulesets: BTreeMap::new(),
                problems: Vec::new(),
                methods: Vec::new(),
                examples: BTreeMap::new(),
                version,
            };
            tmp.theory_order()
        };
        let mut signatures: BTreeMap<String, Signature> = BTreeMap::new();
        for name in &order {
            let Some(t) = theories.get(name) else { continue };
            let mut sig = Signature::builtins();
            for i in &t.imports {
                if let Some(s) = signatures.get(i) {
                    sig.extend(s);
                }
            }
            for d in &t.signature {
                sig.declare(d.op.clone(), d.arity, d.kind);
            }
            signatures.insert(name.clone(), sig);
        }

        // rules and rule sets
        let mut visible_rules: BTreeMap<String, BTreeMap<String, crate::rewrite::RewriteRule>> = BTreeMap::new();
        let mut rulesets: BTreeMap<String, BTreeMap<String, RuleSet>> = BTreeMap::new();
        let mut set_origin: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for name in &order {
            let Some(t) = theories.get(name) else { continue };
            let src = theory_src[name];
            let sig = &signatures[name];
            let mut rules: BTreeMap<String, _> = BTreeMap::new();
            let mut sets: BTreeMap<String, RuleSet> = BTreeMap::new();
            // in a diamond the set declared latest in topological order
            // (the most derived theory) wins
            let mut origin: BTreeMap<String, usize> = BTreeMap::new();
            for i in &t.imports {
                if let Some(r) = visible_rules.get(i) {
                    rules.extend(r.iter().map(|(k, v)| (k.clone(), v.clone())));
                }
                if let Some(s) = rulesets.get(i) {
                    for (k, v) in s {
                        let pos = set_origin[i][k];
                        if origin.get(k).is_none_or(|&p| p < pos) {
                            origin.insert(k.clone(), pos);
                            sets.insert(k.clone(), v.clone());
                        }
                    }
                }
            }
            let here = order.iter().position(|n| n == name).unwrap_or(0);
            let mut own = BTreeSet::new();
            for r in &t.rules {
                if !own.insert(r.name.clone()) {
                    self.error_at(src, &r.name, LoadErrorKind::Duplicate { what: "rule".into(), id: r.name.clone() });
                }
                if let Err(e) = r.validate() {
                    self.error_at(src, &r.name, LoadErrorKind::Rule { message: e.to_string() });
                }
                for term in std::iter::once(&r.lhs).chain([&r.rhs]).chain(&r.conditions) {
                    if let Some(op) = undeclared(term, sig) {
                        self.error_at(
                            src,
                            &r.name,
                            LoadErrorKind::UndeclaredOperator { op, context: format!("rule `{}`", r.name), theory: name.clone() },
                        );
                    }
                }
                rules.insert(r.name.clone(), r.clone());
            }
            for decl in &t.rulesets {
                let mut list = Vec::new();
                for rn in &decl.rules {
                    match rules.get(rn) {
                        Some(r) => list.push(r.clone()),
                        None => self.error_at(src, rn, LoadErrorKind::Dangling { what: format!("rule (in rule set `{}`)", decl.name), id: rn.clone() }),
                    }
                }
                match RuleSet::new(decl.name.clone(), decl.strategy, list) {
                    Ok(set) => {
                        sets.insert(decl.name.clone(), set);
                        origin.insert(decl.name.clone(), here);
                    }
                    Err(e) => {
                        self.error_at(src, &decl.name, LoadErrorKind::Rule { message: e.to_string() })
                    }
                }
            }
            visible_rules.insert(name.clone(), rules);
            rulesets.insert(name.clone(), sets);
            set_origin.insert(name.clone(), origin);
        }

        // problems
        let mut problems = Vec::new();
        let mut ids = BTreeSet::new();
        for (src, p) in std::mem::take(&mut self.problems) {
            self.check_problem(src, &p, None, &signatures, &mut ids);
            problems.push(p);
        }
        problems.sort_by(|a, b| a.id.cmp(&b.id));

        // methods
        let mut methods = Vec::new();
        let mut mids = BTreeSet::new();
        let problem_ids = ids.clone();
        for (src, m) in std::mem::take(&mut self.methods) {
            self.check_method(src, &m, None, &signatures, &rulesets, &visible_rules, &problem_ids, &mut mids);
            methods.push(m);
        }
        methods.sort_by(|a, b| a.id.cmp(&b.id));

        // examples
        let mut examples = BTreeMap::new();
        for (src, e) in std::mem::take(&mut self.examples) {
            if examples.contains_key(&e.id) {
                self.error_at(src, &e.id, LoadErrorKind::Duplicate { what: "example".into(), id: e.id.clone() });
                continue;
            }
            if !problem_ids.contains(&e.problem) {
                self.error_at(src, &e.problem, LoadErrorKind::Dangling { what: "problem".into(), id: e.problem.clone() });
            }
            for m in &e.methods {
                if !mids.contains(m) {
                    self.error_at(src, m, LoadErrorKind::Dangling { what: "method".into(), id: m.clone() });
                }
            }
            if e.formalisations.is_empty() {
                self.error_at(src, &e.id, LoadErrorKind::NoFormalisation { id: e.id.clone() });
            }
            for f in &e.formalisations {
                let r = &f.references;
                match signatures.get(&r.theory) {
                    None => self.error_at(src, &r.theory, LoadErrorKind::Dangling { what: "theory".into(), id: r.theory.clone() }),
                    Some(sig) => {
                        for t in f.terms() {
                            if let Some(op) = undeclared(t, sig) {
                                self.error_at(
                                    src,
                                    &f.name,
                                    LoadErrorKind::UndeclaredOperator { op, context: format!("formalisation `{}`", f.name), theory: r.theory.clone() },
                                );
                            }
                        }
                    }
                }
                if !problem_ids.contains(&r.problem) {
                    self.error_at(src, &r.problem, LoadErrorKind::Dangling { what: "problem".into(), id: r.problem.clone() });
                }
                if !mids.contains(&r.method) {
                    self.error_at(src, &r.method, LoadErrorKind::Dangling { what: "method".into(), id: r.method.clone() });
                }
            }
            examples.insert(e.id.clone(), e);
        }

        if !self.errors.is_empty() {
            return Err(LoadReport { errors: self.errors });
        }
        Ok(KnowledgeStore { theories, signatures, rulesets, problems, methods, examples, version })
    }

    fn check_problem(
        &mut self,
        src: usize,
        p: &ProblemPattern,
        parent: Option<&str>,
        sigs: &BTreeMap<String, Signature>,
        ids: &mut BTreeSet<String>,
    ) {
        if !ids.insert(p.id.clone()) {
            self.error_at(src, &p.id, LoadErrorKind::Duplicate { what: "problem".into(), id: p.id.clone() });
        }
        if let Some(parent) = parent {
            if !p.id.starts_with(&format!("{parent}/")) {
                self.error_at(src, &p.id, LoadErrorKind::ChildPrefix { parent: parent.into(), child: p.id.clone() });
            }
        }
        match sigs.get(&p.theory) {
            None => self.error_at(src, &p.theory, LoadErrorKind::Dangling { what: "theory".into(), id: p.theory.clone() }),
            Some(sig) => {
                for t in p.model.terms().chain(&p.postcondition) {
                    if let Some(op) = undeclared(t, sig) {
                        self.error_at(
                            src,
                            &p.id,
                            LoadErrorKind::UndeclaredOperator { op, context: format!("problem `{}`", p.id), theory: p.theory.clone() },
                        );
                    }
                }
            }
        }
        for c in &p.children {
            self.check_problem(src, c, Some(&p.id), sigs, ids);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn check_method(
        &mut self,
        src: usize,
        m: &Method,
        parent: Option<&str>,
        sigs: &BTreeMap<String, Signature>,
        sets: &BTreeMap<String, BTreeMap<String, RuleSet>>,
        rules: &BTreeMap<String, BTreeMap<String, crate::rewrite::RewriteRule>>,
        problems: &BTreeSet<String>,
        ids: &mut BTreeSet<String>,
    ) {
        if !ids.insert(m.id.clone()) {
            self.error_at(src, &m.id, LoadErrorKind::Duplicate { what: "method".into(), id: m.id.clone() });
        }
        if let Some(parent) = parent {
            if !m.id.starts_with(&format!("{parent}/")) {
                self.error_at(src, &m.id, LoadErrorKind::ChildPrefix { parent: parent.into(), child: m.id.clone() });
            }
        }
        match sigs.get(&m.theory) {
            None => self.error_at(src, &m.theory, LoadErrorKind::Dangling { what: "theory".into(), id: m.theory.clone() }),
            Some(sig) => {
                let ctx = format!("method `{}`", m.id);
                for t in m.guard.iter().flat_map(|g| g.terms()) {
                    if let Some(op) = undeclared(t, sig) {
                        self.error_at(src, &m.id, LoadErrorKind::UndeclaredOperator { op, context: ctx.clone(), theory: m.theory.clone() });
                    }
                }
                if let Some(prog) = &m.program {
                    let mut problems_used = Vec::new();
                    let mut issues = Vec::new();
                    check_program(prog, sig, &sets[&m.theory], &rules[&m.theory], &mut problems_used, &mut issues);
                    for p in problems_used {
                        if !problems.contains(&p) {
                            self.error_at(src, &p, LoadErrorKind::Dangling { what: "problem".into(), id: p.clone() });
                        }
                    }
                    for (needle, message) in issues {
                        self.error_at(src, &needle, LoadErrorKind::Program { message: format!("{ctx}: {message}") });
                    }
                }
            }
        }
        for c in &m.children {
            self.check_method(src, c, Some(&m.id), sigs, sets, rules, problems, ids);
        }
    }
}

fn check_program(
    prog: &[Statement],
    sig: &Signature,
    sets: &BTreeMap<String, RuleSet>,
    rules: &BTreeMap<String, crate::rewrite::RewriteRule>,
    problems: &mut Vec<String>,
    issues: &mut Vec<(String, String)>,
) {
    let term = |t: &Term, issues: &mut Vec<(String, String)>| {
        if let Some(op) = undeclared(t, sig) {
            issues.push((op.clone(), format!("operator `{op}` is not declared")));
        }
    };
    for s in prog {
        match s {
            Statement::Step { tactic, .. } => {
                for t in tactic.terms() {
                    term(t, issues);
                }
                match tactic {
                    Tactic::Rewrite { rule, .. } if !rules.contains_key(rule) => {
                        issues.push((rule.clone(), format!("unknown rule `{rule}`")))
                    }
                    Tactic::Simplify { ruleset } if !sets.contains_key(ruleset) => {
                        issues.push((ruleset.clone(), format!("unknown rule set `{ruleset}`")))
                    }
                    Tactic::SubProblem { problem } => {
                        issues.push((problem.clone(), "sub_problem is written as a `sub` statement".into()))
                    }
                    _ => {}
                }
            }
            Statement::Let { value, .. } => term(value, issues),
            Statement::Sub { problem, body, .. } => {
                problems.push(problem.clone());
                check_program(body, sig, sets, rules, problems, issues);
            }
            Statement::Branch { cond, then, otherwise } => {
                term(cond, issues);
                check_program(then, sig, sets, rules, problems, issues);
                check_program(otherwise, sig, sets, rules, problems, issues);
            }
            Statement::Repeat { body, until, .. } => {
                term(until, issues);
                if !contains_step(body) {
                    issues.push(("repeat".into(), "repeat body contains no tactic".into()));
                }
                check_program(body, sig, sets, rules, problems, issues);
            }
            Statement::Result { values } => values.iter().for_each(|v| term(v, issues)),
        }
    }
}

fn contains_step(body: &[Statement]) -> bool {
    body.iter().any(|s| match s {
        Statement::Step { .. } => true,
        Statement::Sub { body, .. } | Statement::Repeat { body, .. } => contains_step(body),
        Statement::Branch { then, otherwise, .. } => contains_step(then) || contains_step(otherwise),
        _ => false,
    })
}

/// First operator of `t` not declared in `sig`.
pub fn undeclared(t: &Term, sig: &Signature) -> Option<String> {
    t.ops().into_iter().find(|op| !sig.contains(op)).or_else(|| {
        fn consts(t: &Term, out: &mut Vec<String>) {
            match t {
                Term::Constant(c) => out.push(c.clone()),
                _ => t.children().into_iter().for_each(|c| consts(c, out)),
            }
        }
        let mut cs = Vec::new();
        consts(t, &mut cs);
        cs.into_iter().find(|c| !sig.contains(c))
    })
}

/// Smallest-name-first cycle in the import graph, if any.
fn find_cycle(theories: &BTreeMap<String, Theory>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn dfs(n: &str, g: &BTreeMap<String, Theory>, marks: &mut BTreeMap<String, Mark>, stack: &mut Vec<String>) -> Option<Vec<String>> {
        marks.insert(n.to_string(), Mark::Active);
        stack.push(n.to_string());
        if let Some(t) = g.get(n) {
            let mut imports = t.imports.clone();
            imports.sort();
            for i in imports {
                match marks.get(&i) {
                    Some(Mark::Active) => {
                        let start = stack.iter().position(|s| *s == i).unwrap();
                        return Some(stack[start..].to_vec());
                    }
                    Some(Mark::Done) => {}
                    None => {
                        if let Some(c) = dfs(&i, g, marks, stack) {
                            return Some(c);
                        }
                    }
                }
            }
        }
        stack.pop();
        marks.insert(n.to_string(), Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for n in theories.keys() {
        if !marks.contains_key(n) {
            if let Some(c) = dfs(n, theories, &mut marks, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}
