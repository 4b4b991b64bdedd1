use thiserror::Error;

use super::notation::{Assoc, Fixity, NotationTable};
use super::parser::{interval_sep, INTERVAL_BOUND_PREC};
use super::{BinderKind, Term};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("no notation entry for operator `{0}`")]
    MissingNotation(String),
}

/// Precedence of an atom or anything already bracketed.
pub(crate) const ATOM: u8 = 100;

/// One-line ASCII rendering with minimal parentheses.
pub fn render_linear(t: &Term, table: &NotationTable) -> Result<String, RenderError> {
    Ok(Linear { table }.go(t)?.0)
}

struct Linear<'a> {
    table: &'a NotationTable,
}

/// How a rendered child binds: its precedence and whether it starts with
/// a minus sign.
pub(crate) fn needs_parens(child: u8, parent: u8, assoc: Assoc, right_side: bool) -> bool {
    if child < parent {
        return true;
    }
    if child == parent {
        return match (assoc, right_side) {
            (Assoc::Left, false) | (Assoc::Right, true) => false,
            _ => true,
        };
    }
    false
}

/// Effective precedence of a term as an operand, independent of rendering.
pub(crate) fn term_prec(t: &Term, table: &NotationTable) -> u8 {
    match t {
        Term::Number(n) if n.is_negative() => 6,
        Term::Number(n) if !n.is_decimal_printable() => 5,
        Term::Apply(op, args) => {
            if op.as_str() == "list" || interval_sep(op.as_str()).is_some() {
                return ATOM;
            }
            if op.as_str() == "app" && args.first().is_some_and(|h| h.as_var().is_some()) {
                return ATOM;
            }
            match table.get(op.as_str()) {
                Some(e) if matches!(e.fixity, Fixity::Infix | Fixity::Prefix) => e.precedence,
                _ => ATOM,
            }
        }
        Term::Binder(kind, ..) => table.get(kind.op_name()).map(|e| e.precedence).unwrap_or(0),
        _ => ATOM,
    }
}

pub(crate) fn starts_with_minus(t: &Term) -> bool {
    match t {
        Term::Number(n) => n.is_negative(),
        Term::Apply(op, args) => match op.as_str() {
            "neg" => true,
            "plus" | "minus" | "times" | "div" | "pow" | "eq" | "neq" | "lt" | "le" | "gt" | "ge" | "and" | "or"
            | "implies" => args.first().is_some_and(starts_with_minus),
            _ => false,
        },
        _ => false,
    }
}

impl Linear<'_> {
    fn go(&self, t: &Term) -> Result<(String, u8), RenderError> {
        let table = self.table;
        match t {
            Term::Number(n) => Ok((n.to_linear(), term_prec(t, table))),
            Term::Variable(v) | Term::Constant(v) => Ok((v.clone(), ATOM)),
            Term::Binder(kind, name, body) => {
                let entry = table.get(kind.op_name()).ok_or_else(|| RenderError::MissingNotation(kind.op_name().into()))?;
                match kind {
                    BinderKind::Deriv => {
                        let (b, _) = self.go(body)?;
                        let simple = matches!(body.as_ref(), Term::Variable(_) | Term::Constant(_))
                            || matches!(body.as_ref(), Term::Number(n) if !n.is_negative() && n.is_decimal_printable());
                        let text = if simple {
                            format!("{}{} {}", entry.symbol, name, b)
                        } else {
                            format!("{}{}({})", entry.symbol, name, b)
                        };
                        Ok((text, entry.precedence))
                    }
                    BinderKind::Forall | BinderKind::Lambda => {
                        let mut names = vec![name.clone()];
                        let mut inner = body.as_ref();
                        while let Term::Binder(k2, n2, b2) = inner {
                            if k2 != kind {
                                break;
                            }
                            names.push(n2.clone());
                            inner = b2;
                        }
                        let (b, _) = self.go(inner)?;
                        Ok((format!("{} {}. {}", entry.symbol, names.join(" "), b), entry.precedence))
                    }
                }
            }
            Term::Apply(op, args) => {
                let name = op.as_str();
                if name == "list" {
                    let items: Result<Vec<_>, _> = args.iter().map(|a| self.go(a).map(|x| x.0)).collect();
                    return Ok((format!("[{}]", items?.join(", ")), ATOM));
                }
                if let Some(sep) = interval_sep(name) {
                    let lo = self.operand(&args[0], INTERVAL_BOUND_PREC, Assoc::None, false)?;
                    let hi = self.operand(&args[1], INTERVAL_BOUND_PREC, Assoc::None, true)?;
                    return Ok((format!("{{{lo}{sep}{hi}}}"), ATOM));
                }
                if name == "app" && args.len() == 2 {
                    if let Term::Variable(f) = &args[0] {
                        let (a, _) = self.go(&args[1])?;
                        return Ok((format!("{f}({a})"), ATOM));
                    }
                }
                let entry = table.get(name).ok_or_else(|| RenderError::MissingNotation(name.into()))?;
                match entry.fixity {
                    Fixity::Infix if args.len() == 2 => {
                        let l = self.operand(&args[0], entry.precedence, entry.assoc, false)?;
                        let l = if name == "div" && would_glue(&l, &r_probe(self, &args[1])?) { format!("({l})") } else { l };
                        let r = self.operand(&args[1], entry.precedence, entry.assoc, true)?;
                        let text = if entry.precedence <= 2 || entry.symbol.chars().all(|c| c.is_ascii_alphabetic()) {
                            format!("{l} {} {r}", entry.symbol)
                        } else {
                            format!("{l}{}{r}", entry.symbol)
                        };
                        Ok((text, entry.precedence))
                    }
                    Fixity::Prefix if args.len() == 1 => {
                        let (s, cp) = self.go(&args[0])?;
                        let paren = cp < entry.precedence
                            || (cp == entry.precedence && !matches!(&args[0], Term::Apply(o, _) if o == op))
                            || matches!(&args[0], Term::Number(_))
                            || starts_with_minus(&args[0])
                            || (name == "neg" && s.starts_with('-'));
                        let s = if paren { format!("({s})") } else { s };
                        let glue = if entry.symbol.chars().all(|c| c.is_ascii_alphabetic()) { " " } else { "" };
                        Ok((format!("{}{glue}{s}", entry.symbol), entry.precedence))
                    }
                    _ => {
                        let items: Result<Vec<_>, _> = args.iter().map(|a| self.go(a).map(|x| x.0)).collect();
                        Ok((format!("{}({})", entry.symbol, items?.join(",")), ATOM))
                    }
                }
            }
        }
    }

    fn operand(&self, t: &Term, parent: u8, assoc: Assoc, right: bool) -> Result<String, RenderError> {
        let (s, cp) = self.go(t)?;
        let binder = matches!(t, Term::Binder(k, ..) if *k != BinderKind::Deriv);
        let paren = binder || needs_parens(cp, parent, assoc, right) || (right && parent >= 4 && starts_with_minus(t));
        Ok(if paren { format!("({s})") } else { s })
    }
}

fn r_probe(l: &Linear<'_>, t: &Term) -> Result<String, RenderError> {
    Ok(l.go(t)?.0)
}

/// `d` followed by `/d<name>` would lex as a derivative binder.
fn would_glue(left: &str, right: &str) -> bool {
    let lone_d = left.ends_with('d')
        && !left[..left.len() - 1].chars().last().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '?');
    let mut r = right.chars();
    lone_d && r.next() == Some('d') && r.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_' || c == '?')
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{parse, Signature};

    fn rt(s: &str) -> String {
        let t = parse(s, &Signature::full()).unwrap();
        render_linear(&t, NotationTable::default_table()).unwrap()
    }

    #[test]
    fn fraction_prints_as_typed() {
        assert_eq!(rt("(x+1)/(y-2)"), "(x+1)/(y-2)");
        assert_eq!(rt("x"), "x");
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(rt("((a+b))+c"), "a+b+c");
        assert_eq!(rt("a+(b+c)"), "a+(b+c)");
        assert_eq!(rt("a-(b-c)"), "a-(b-c)");
        assert_eq!(rt("(a^b)^c"), "(a^b)^c");
        assert_eq!(rt("a^(b^c)"), "a^b^c");
        assert_eq!(rt("sqrt(r^2 - (u/2)^2)"), "sqrt(r^2-(u/2)^2)");
        assert_eq!(rt("(-2)^2"), "(-2)^2");
        assert_eq!(rt("x - -2"), "x-(-2)");
        assert_eq!(rt("-(2)"), "-(2)");
        assert_eq!(rt("-(-x)"), "-(-x)");
        assert_eq!(rt("(a=b) & c"), "a=b & c");
    }

    #[test]
    fn binders_and_brackets() {
        assert_eq!(rt("forall a. forall b. a <= b"), "forall a b. a<=b");
        assert_eq!(rt("d/du (2*u) - d/du u^2"), "d/du(2*u)-d/du(u^2)");
        assert_eq!(rt("d/du u"), "d/du u");
        assert_eq!(rt("[v=2, v=-2]"), "[v=2, v=-2]");
        assert_eq!(rt("{0 <..< pi/2}"), "{0<..<pi/2}");
        assert_eq!(rt("A(u) = 2*u"), "A(u)=2*u");
        assert_eq!(rt("(d)/dx"), "(d)/dx");
        assert_eq!(rt("(2*d)/dx"), "(2*d)/dx");
        assert_eq!(rt("d/x"), "d/x");
        assert_eq!(rt("x < -1"), "x<-1");
        assert_eq!(rt("x ~= -1"), "x~=-1");
        assert_eq!(rt("x >= -1 & y <= -u"), "x>=-1 & y<=-u");
    }

    #[test]
    fn missing_notation_names_operator() {
        let t = Term::binary("frob", Term::var("a"), Term::var("b"));
        assert_eq!(
            render_linear(&t, NotationTable::default_table()),
            Err(RenderError::MissingNotation("frob".into()))
        );
    }
}
