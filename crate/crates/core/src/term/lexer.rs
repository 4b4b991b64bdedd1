use super::notation::NotationTable;
use super::parser::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Num(String),
    Ident(String),
    Sym(String),
    /// A glued binder such as `d/du`: (binder op, bound name).
    Glued(String, String),
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

const PUNCT: &[&str] = &["<=..<=", "<..<=", "<=..<", "<..<", "(", ")", "[", "]", "{", "}", ",", "."];

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '?'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn tokenize(text: &str, table: &NotationTable) -> Result<Vec<Token>, ParseError> {
    let ops = table.punct_symbols();
    let glued = table.glued_binders();
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < text.len() {
        let c = text[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let rest = &text[i..];
        for (op, sym) in &glued {
            if let Some(after) = rest.strip_prefix(sym.as_str()) {
                if after.chars().next().is_some_and(ident_start) {
                    let (name, len) = lex_ident(after);
                    let end = i + sym.len() + len;
                    out.push(Token { tok: Tok::Glued(op.as_str().to_string(), name), start: i, end });
                    i = end;
                    continue 'outer;
                }
            }
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
                j += 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
            }
            out.push(Token { tok: Tok::Num(text[i..j].to_string()), start: i, end: j });
            i = j;
            continue;
        }
        if ident_start(c) {
            let (name, len) = lex_ident(rest);
            if name == "?" {
                return Err(ParseError::new(i, "pattern variable name expected after `?`", vec!["identifier".into()]));
            }
            out.push(Token { tok: Tok::Ident(name), start: i, end: i + len });
            i += len;
            continue;
        }
        // interval separators and brackets first, then operator symbols by length
        let mut best: Option<&str> = None;
        for p in PUNCT.iter().copied().chain(ops.iter().map(String::as_str)) {
            if rest.starts_with(p) && best.is_none_or(|b| p.len() > b.len()) {
                best = Some(p);
            }
        }
        match best {
            Some(p) => {
                out.push(Token { tok: Tok::Sym(p.to_string()), start: i, end: i + p.len() });
                i += p.len();
            }
            None => {
                return Err(ParseError::new(i, format!("unexpected character `{c}`"), Vec::new()));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, start: text.len(), end: text.len() });
    Ok(out)
}

/// Identifier: optional `?`, a letter or `_`, word characters, then any
/// number of trailing primes.
fn lex_ident(s: &str) -> (String, usize) {
    let mut len = 0;
    let mut chars = s.chars().peekable();
    if chars.peek() == Some(&'?') {
        chars.next();
        len += 1;
    }
    let mut first = true;
    while let Some(&c) = chars.peek() {
        let ok = if first { c.is_ascii_alphabetic() || c == '_' } else { ident_char(c) };
        if !ok {
            break;
        }
        first = false;
        chars.next();
        len += 1;
    }
    if !first {
        while chars.peek() == Some(&'\'') {
            chars.next();
            len += 1;
        }
    }
    (s[..len].to_string(), len)
}
