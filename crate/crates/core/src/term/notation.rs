use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::OpId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assoc {
    Left,
    Right,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fixity {
    Infix,
    Prefix,
    Function,
    Binder,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotationEntry {
    pub symbol: String,
    pub precedence: u8,
    pub assoc: Assoc,
    pub fixity: Fixity,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NotationError {
    #[error("line {line}: expected 5 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: bad precedence `{text}`")]
    Precedence { line: usize, text: String },
    #[error("line {line}: unknown associativity `{text}`")]
    Assoc { line: usize, text: String },
    #[error("line {line}: unknown fixity `{text}`")]
    Fixity { line: usize, text: String },
    #[error("line {line}: symbol `{symbol}` is not ASCII")]
    NonAscii { line: usize, symbol: String },
    #[error("line {line}: duplicate entry for `{op}`")]
    Duplicate { line: usize, op: String },
}

/// Maps operators to their one-line ASCII spelling and parsing rules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NotationTable {
    name: String,
    entries: BTreeMap<OpId, NotationEntry>,
}

const ASCII_MATH: &str = "\
# opid\tsymbol\tprecedence\tassoc\tfixity
implies\t-->\t1\tright\tinfix
or\t|\t2\tleft\tinfix
and\t&\t2\tleft\tinfix
not\t~\t3\tnone\tprefix
eq\t=\t3\tnone\tinfix
neq\t~=\t3\tnone\tinfix
lt\t<\t3\tnone\tinfix
le\t<=\t3\tnone\tinfix
gt\t>\t3\tnone\tinfix
ge\t>=\t3\tnone\tinfix
plus\t+\t4\tleft\tinfix
minus\t-\t4\tleft\tinfix
times\t*\t5\tleft\tinfix
div\t/\t5\tleft\tinfix
neg\t-\t6\tnone\tprefix
pow\t^\t7\tright\tinfix
sqrt\tsqrt\t9\tnone\tfunction
sin\tsin\t9\tnone\tfunction
cos\tcos\t9\tnone\tfunction
ln\tln\t9\tnone\tfunction
exp\texp\t9\tnone\tfunction
app\tapp\t9\tnone\tfunction
forall\tforall\t0\tnone\tbinder
lambda\tlambda\t0\tnone\tbinder
deriv\td/d\t6\tnone\tbinder
";

/// Names reserved for built-in predicates and template functions. They
/// are spelled as ordinary function calls.
const BUILTIN_FUNCTIONS: &[&str] = &[
    "is_num", "is_atom", "indep", "before", "has_head", "has_deriv", "is_poly_in", "is_root_in",
    "nth", "lhs", "rhs", "len", "first_var", "calc", "is_normal", "degree",
];

impl NotationTable {
    /// The shipped `ascii-math` table.
    pub fn default_table() -> &'static NotationTable {
        static TABLE: OnceLock<NotationTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let mut t = NotationTable::parse_file("ascii-math", ASCII_MATH).expect("built-in table parses");
            for f in BUILTIN_FUNCTIONS {
                t.entries.insert(
                    OpId::new(*f),
                    NotationEntry { symbol: (*f).to_string(), precedence: 9, assoc: Assoc::None, fixity: Fixity::Function },
                );
            }
            t
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        NotationTable { name: name.into(), entries: BTreeMap::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Parses the mapping-file format: `opid TAB symbol TAB precedence TAB
    /// assoc TAB fixity`, `#` comment lines, blank lines ignored.
    pub fn parse_file(name: &str, text: &str) -> Result<Self, NotationError> {
        let mut table = NotationTable::empty(name);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 5 {
                return Err(NotationError::FieldCount { line, found: fields.len() });
            }
            let symbol = fields[1].to_string();
            if !symbol.is_ascii() {
                return Err(NotationError::NonAscii { line, symbol });
            }
            let precedence = fields[2]
                .parse()
                .map_err(|_| NotationError::Precedence { line, text: fields[2].to_string() })?;
            let assoc = match fields[3] {
                "left" => Assoc::Left,
                "right" => Assoc::Right,
                "none" => Assoc::None,
                other => return Err(NotationError::Assoc { line, text: other.to_string() }),
            };
            let fixity = match fields[4] {
                "infix" => Fixity::Infix,
                "prefix" => Fixity::Prefix,
                "function" => Fixity::Function,
                "binder" => Fixity::Binder,
                other => return Err(NotationError::Fixity { line, text: other.to_string() }),
            };
            let op = OpId::new(fields[0]);
            if table.entries.contains_key(&op) {
                return Err(NotationError::Duplicate { line, op: fields[0].to_string() });
            }
            table.entries.insert(op, NotationEntry { symbol, precedence, assoc, fixity });
        }
        Ok(table)
    }

    /// Overlays entries from a mapping file on top of this table.
    pub fn overlay(&self, name: &str, text: &str) -> Result<Self, NotationError> {
        let patch = NotationTable::parse_file(name, text)?;
        let mut out = self.clone();
        out.name = name.to_string();
        out.entries.extend(patch.entries);
        Ok(out)
    }

    pub fn to_file(&self) -> String {
        let mut s = String::from("# opid\tsymbol\tprecedence\tassoc\tfixity\n");
        for (op, e) in &self.entries {
            let assoc = match e.assoc {
                Assoc::Left => "left",
                Assoc::Right => "right",
                Assoc::None => "none",
            };
            let fixity = match e.fixity {
                Fixity::Infix => "infix",
                Fixity::Prefix => "prefix",
                Fixity::Function => "function",
                Fixity::Binder => "binder",
            };
            s.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", op, e.symbol, e.precedence, assoc, fixity));
        }
        s
    }

    pub fn get(&self, op: &str) -> Option<&NotationEntry> {
        self.entries.get(&OpId::new(op))
    }

    pub fn insert(&mut self, op: &str, entry: NotationEntry) {
        self.entries.insert(OpId::new(op), entry);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&OpId, &NotationEntry)> {
        self.entries.iter()
    }

    /// Infix operator spelled `symbol`.
    pub fn infix(&self, symbol: &str) -> Option<(&OpId, &NotationEntry)> {
        self.entries.iter().find(|(_, e)| e.fixity == Fixity::Infix && e.symbol == symbol)
    }

    pub fn prefix(&self, symbol: &str) -> Option<(&OpId, &NotationEntry)> {
        self.entries.iter().find(|(_, e)| e.fixity == Fixity::Prefix && e.symbol == symbol)
    }

    pub fn function(&self, name: &str) -> Option<(&OpId, &NotationEntry)> {
        self.entries.iter().find(|(_, e)| e.fixity == Fixity::Function && e.symbol == name)
    }

    pub fn binder(&self, symbol: &str) -> Option<(&OpId, &NotationEntry)> {
        self.entries.iter().find(|(_, e)| e.fixity == Fixity::Binder && e.symbol == symbol)
    }

    /// Non-alphanumeric symbols, longest first, for the lexer.
    pub(crate) fn punct_symbols(&self) -> Vec<String> {
        let mut syms: Vec<String> = self
            .entries
            .values()
            .filter(|e| matches!(e.fixity, Fixity::Infix | Fixity::Prefix))
            .filter(|e| !e.symbol.chars().next().is_some_and(|c| c.is_ascii_alphabetic()))
            .map(|e| e.symbol.clone())
            .collect();
        syms.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        syms.dedup();
        syms
    }

    /// Binder symbols that are not plain identifiers (e.g. `d/d`), which
    /// the lexer glues to the bound name that follows.
    pub(crate) fn glued_binders(&self) -> Vec<(OpId, String)> {
        self.entries
            .iter()
            .filter(|(_, e)| e.fixity == Fixity::Binder && !e.symbol.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
            .map(|(op, e)| (op.clone(), e.symbol.clone()))
            .collect()
    }
}
