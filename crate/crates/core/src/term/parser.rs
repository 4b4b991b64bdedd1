use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexer::{tokenize, Tok, Token};
use super::notation::{Assoc, NotationTable};
use super::{BinderKind, Number, OpId, Signature, Term};

/// A syntax error with a byte position into the input and the set of
/// tokens that would have been accepted there.
#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("syntax error at {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub(crate) fn new(position: usize, message: impl Into<String>, expected: Vec<String>) -> Self {
        ParseError { position, message: message.into(), expected }
    }
}

const INTERVALS: &[(&str, &str)] = &[("<..<", "ivl_oo"), ("<=..<", "ivl_co"), ("<..<=", "ivl_oc"), ("<=..<=", "ivl_cc")];

pub(crate) fn interval_op(sep: &str) -> Option<&'static str> {
    INTERVALS.iter().find(|(s, _)| *s == sep).map(|(_, op)| *op)
}

pub(crate) fn interval_sep(op: &str) -> Option<&'static str> {
    INTERVALS.iter().find(|(_, o)| *o == op).map(|(s, _)| *s)
}

/// Precedence at which interval bounds are parsed: above comparisons so
/// the separator is never swallowed.
pub(crate) const INTERVAL_BOUND_PREC: u8 = 4;

/// Parses linear notation into a term, using `signature` to decide which
/// operators are available and the default notation table for spelling.
pub fn parse(text: &str, signature: &Signature) -> Result<Term, ParseError> {
    parse_with(text, signature, NotationTable::default_table())
}

pub fn parse_with(text: &str, signature: &Signature, table: &NotationTable) -> Result<Term, ParseError> {
    let tokens = tokenize(text, table)?;
    let mut p = Parser { tokens, pos: 0, sig: signature, table };
    let t = p.expr(0)?;
    match p.peek() {
        Tok::Eof => Ok(t),
        _ => Err(p.unexpected(vec!["end of input".into(), "operator".into()])),
    }
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    sig: &'a Signature,
    table: &'a NotationTable,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> usize {
        self.tokens[self.pos].start
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: Vec<String>) -> ParseError {
        let what = match self.peek() {
            Tok::Eof => "end of input".to_string(),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Ident(i) => format!("identifier `{i}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Glued(_, v) => format!("derivative binder over `{v}`"),
        };
        ParseError::new(self.here(), format!("unexpected {what}"), expected)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(s.to_string()) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(vec![format!("`{s}`")]))
        }
    }

    fn require_op(&self, op: &str, at: usize, arity: usize) -> Result<(), ParseError> {
        match self.sig.get(op) {
            None => Err(ParseError::new(at, format!("operator `{op}` is not declared in the active theory"), Vec::new())),
            Some(d) if !d.arity.accepts(arity) => Err(ParseError::new(
                at,
                format!("operator `{op}` expects {:?} arguments, got {arity}", d.arity),
                Vec::new(),
            )),
            Some(_) => Ok(()),
        }
    }

    fn expr(&mut self, min_prec: u8) -> Result<Term, ParseError> {
        let mut lhs = self.prefix()?;
        let mut last_nonassoc: Option<u8> = None;
        loop {
            let (op, prec, assoc) = match self.peek() {
                Tok::Sym(s) => match self.table.infix(s) {
                    Some((op, e)) => (op.clone(), e.precedence, e.assoc),
                    None => break,
                },
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            if assoc == Assoc::None && last_nonassoc == Some(prec) {
                return Err(ParseError::new(
                    self.here(),
                    format!("operator `{op}` is not associative; add parentheses"),
                    Vec::new(),
                ));
            }
            let at = self.here();
            self.bump();
            self.require_op(op.as_str(), at, 2)?;
            let next_min = match assoc {
                Assoc::Right => prec,
                _ => prec + 1,
            };
            let rhs = self.expr(next_min)?;
            lhs = Term::Apply(op, vec![lhs, rhs]);
            last_nonassoc = if assoc == Assoc::None { Some(prec) } else { None };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Term, ParseError> {
        let start = self.here();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Number::from_decimal(&n)
                    .map(Term::Number)
                    .ok_or_else(|| ParseError::new(start, format!("bad number `{n}`"), Vec::new()))
            }
            Tok::Glued(op, var) => {
                self.bump();
                let entry = self.table.get(&op).cloned();
                self.require_op(&op, start, 1)?;
                let kind = BinderKind::from_op(&op)
                    .ok_or_else(|| ParseError::new(start, format!("`{op}` is not a binder"), Vec::new()))?;
                let prec = entry.map(|e| e.precedence).unwrap_or(0);
                let body = self.expr(prec)?;
                Ok(Term::binder(kind, var, body))
            }
            Tok::Ident(name) => self.identifier(name, start),
            Tok::Sym(s) if s == "(" => {
                self.bump();
                let t = self.expr(0)?;
                self.expect_sym(")")?;
                Ok(t)
            }
            Tok::Sym(s) if s == "[" => {
                self.bump();
                let items = self.comma_list("]")?;
                self.require_op("list", start, items.len())?;
                Ok(Term::list(items))
            }
            Tok::Sym(s) if s == "{" => {
                self.bump();
                let lo = self.expr(INTERVAL_BOUND_PREC)?;
                let sep = match self.peek() {
                    Tok::Sym(s) if interval_op(s).is_some() => s.clone(),
                    _ => {
                        return Err(self.unexpected(INTERVALS.iter().map(|(s, _)| format!("`{s}`")).collect()));
                    }
                };
                let at = self.here();
                self.bump();
                let op = interval_op(&sep).unwrap();
                self.require_op(op, at, 2)?;
                let hi = self.expr(INTERVAL_BOUND_PREC)?;
                self.expect_sym("}")?;
                Ok(Term::apply(op, vec![lo, hi]))
            }
            Tok::Sym(s) => {
                let Some((op, entry)) = self.table.prefix(&s).map(|(o, e)| (o.clone(), e.clone())) else {
                    return Err(self.unexpected(vec!["term".into()]));
                };
                self.bump();
                self.require_op(op.as_str(), start, 1)?;
                // `-7` is a negative literal unless a tighter operator follows
                if op.as_str() == "neg" {
                    if let (Tok::Num(n), next) = (self.peek().clone(), self.peek_at(1).clone()) {
                        let tighter = match &next {
                            Tok::Sym(s2) => self.table.infix(s2).is_some_and(|(_, e)| e.precedence > entry.precedence),
                            _ => false,
                        };
                        if !tighter {
                            let at = self.here();
                            self.bump();
                            let num = Number::from_decimal(&n)
                                .ok_or_else(|| ParseError::new(at, format!("bad number `{n}`"), Vec::new()))?;
                            return Ok(Term::Number(num.neg()));
                        }
                    }
                }
                let operand = self.expr(entry.precedence)?;
                Ok(Term::Apply(op, vec![operand]))
            }
            Tok::Eof => Err(self.unexpected(vec!["term".into()])),
        }
    }

    fn identifier(&mut self, name: String, start: usize) -> Result<Term, ParseError> {
        let tok = self.bump();
        // binder keywords: `forall x y. body`
        if let Some((op, entry)) = self.table.binder(&name).map(|(o, e)| (o.clone(), e.clone())) {
            self.require_op(op.as_str(), start, 1)?;
            let kind = BinderKind::from_op(op.as_str())
                .ok_or_else(|| ParseError::new(start, format!("`{op}` is not a binder"), Vec::new()))?;
            let mut names = Vec::new();
            while let Tok::Ident(v) = self.peek().clone() {
                self.bump();
                names.push(v);
            }
            if names.is_empty() {
                return Err(self.unexpected(vec!["bound identifier".into()]));
            }
            self.expect_sym(".")?;
            let mut body = self.expr(entry.precedence)?;
            for v in names.into_iter().rev() {
                body = Term::binder(kind, v, body);
            }
            return Ok(body);
        }
        let adjacent_paren =
            matches!(self.peek(), Tok::Sym(s) if s == "(") && self.tokens[self.pos].start == tok.end;
        if let Some((op, _)) = self.table.function(&name).map(|(o, e)| (o.clone(), e.clone())) {
            if !matches!(self.peek(), Tok::Sym(s) if s == "(") {
                return Err(self.unexpected(vec!["`(`".into()]));
            }
            self.bump();
            let args = self.comma_list(")")?;
            self.require_op(op.as_str(), start, args.len())?;
            return Ok(Term::Apply(op, args));
        }
        if adjacent_paren {
            // `A(u)` applies a function-valued variable
            self.bump();
            let args = self.comma_list(")")?;
            if args.len() != 1 {
                return Err(ParseError::new(start, format!("`{name}(...)` takes exactly one argument"), Vec::new()));
            }
            self.require_op("app", start, 2)?;
            let mut all = vec![Term::Variable(name)];
            all.extend(args);
            return Ok(Term::Apply(OpId::new("app"), all));
        }
        if matches!(self.peek(), Tok::Sym(s) if s == "(") || matches!(self.peek(), Tok::Ident(_) | Tok::Num(_)) {
            return Err(ParseError::new(
                self.here(),
                "juxtaposition is not accepted; write `*` for products",
                vec!["operator".into()],
            ));
        }
        if self.sig.is_constant(&name) {
            return Ok(Term::Constant(name));
        }
        Ok(Term::Variable(name))
    }

    fn comma_list(&mut self, close: &str) -> Result<Vec<Term>, ParseError> {
        let mut items = Vec::new();
        if *self.peek() == Tok::Sym(close.to_string()) {
            self.bump();
            return Ok(items);
        }
        loop {
            items.push(self.expr(0)?);
            match self.peek() {
                Tok::Sym(s) if s == "," => {
                    self.bump();
                }
                Tok::Sym(s) if s == close => {
                    self.bump();
                    return Ok(items);
                }
                _ => return Err(self.unexpected(vec!["`,`".into(), format!("`{close}`")])),
            }
        }
    }
}
