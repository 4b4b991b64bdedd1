//! Presentation markup (MathML elements) for the visual view. Every
//! element standing for a term node carries a `data-path` attribute with
//! the dotted child-index path of that node, so a click maps back to a
//! [`Path`](super::Path).

use super::notation::{Fixity, NotationTable};
use super::parser::interval_sep;
use super::render::{needs_parens, starts_with_minus, term_prec, RenderError};
use super::{BinderKind, Term};

pub fn render_pretty(t: &Term) -> Result<String, RenderError> {
    render_pretty_at(t, &[])
}

/// Markup for `t` as if it sat at `base` inside a larger term.
pub fn render_pretty_at(t: &Term, base: &[usize]) -> Result<String, RenderError> {
    let mut out = String::new();
    let mut path = base.to_vec();
    go(t, &mut path, NotationTable::default_table(), &mut out)?;
    Ok(out)
}

pub(crate) fn path_attr(path: &[usize]) -> String {
    path.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn mo(out: &mut String, s: &str) {
    out.push_str("<mo>");
    out.push_str(&esc(s));
    out.push_str("</mo>");
}

fn display_symbol(op: &str, fallback: &str) -> String {
    match op {
        "times" => "\u{b7}".into(),
        "minus" | "neg" => "\u{2212}".into(),
        "le" => "\u{2264}".into(),
        "ge" => "\u{2265}".into(),
        "neq" => "\u{2260}".into(),
        "and" => "\u{2227}".into(),
        "or" => "\u{2228}".into(),
        "implies" => "\u{27f9}".into(),
        "not" => "\u{ac}".into(),
        _ => fallback.to_string(),
    }
}

fn child(
    t: &Term,
    idx: usize,
    path: &mut Vec<usize>,
    table: &NotationTable,
    out: &mut String,
    paren: bool,
) -> Result<(), RenderError> {
    path.push(idx);
    if paren {
        mo(out, "(");
    }
    go(t, path, table, out)?;
    if paren {
        mo(out, ")");
    }
    path.pop();
    Ok(())
}

fn go(t: &Term, path: &mut Vec<usize>, table: &NotationTable, out: &mut String) -> Result<(), RenderError> {
    let attr = path_attr(path);
    match t {
        Term::Number(n) => {
            out.push_str(&format!("<mn data-path=\"{attr}\">{}</mn>", esc(&n.to_linear())));
        }
        Term::Variable(v) => {
            out.push_str(&format!("<mi data-path=\"{attr}\">{}</mi>", esc(v)));
        }
        Term::Constant(c) => {
            let shown = if c == "pi" { "\u{3c0}" } else { c.as_str() };
            out.push_str(&format!("<mi data-path=\"{attr}\" class=\"constant\">{}</mi>", esc(shown)));
        }
        Term::Binder(kind, name, body) => {
            out.push_str(&format!("<mrow data-path=\"{attr}\">"));
            match kind {
                BinderKind::Deriv => {
                    out.push_str(&format!("<mfrac><mo>d</mo><mrow><mo>d</mo><mi>{}</mi></mrow></mfrac>", esc(name)));
                    let paren = !body.is_leaf();
                    child(body, 0, path, table, out, paren)?;
                }
                BinderKind::Forall | BinderKind::Lambda => {
                    mo(out, if *kind == BinderKind::Forall { "\u{2200}" } else { "\u{3bb}" });
                    out.push_str(&format!("<mi>{}</mi>", esc(name)));
                    mo(out, ".");
                    child(body, 0, path, table, out, false)?;
                }
            }
            out.push_str("</mrow>");
        }
        Term::Apply(op, args) => {
            let name = op.as_str();
            if name == "list" {
                out.push_str(&format!("<mrow data-path=\"{attr}\">"));
                mo(out, "[");
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        mo(out, ",");
                    }
                    child(a, i, path, table, out, false)?;
                }
                mo(out, "]");
                out.push_str("</mrow>");
                return Ok(());
            }
            if let Some(sep) = interval_sep(name) {
                out.push_str(&format!("<mrow data-path=\"{attr}\">"));
                mo(out, "{");
                child(&args[0], 0, path, table, out, false)?;
                mo(out, sep);
                child(&args[1], 1, path, table, out, false)?;
                mo(out, "}");
                out.push_str("</mrow>");
                return Ok(());
            }
            match name {
                "div" if args.len() == 2 => {
                    out.push_str(&format!("<mfrac data-path=\"{attr}\">"));
                    child(&args[0], 0, path, table, out, false)?;
                    child(&args[1], 1, path, table, out, false)?;
                    out.push_str("</mfrac>");
                    return Ok(());
                }
                "pow" if args.len() == 2 => {
                    out.push_str(&format!("<msup data-path=\"{attr}\">"));
                    let paren = !args[0].is_leaf() || starts_with_minus(&args[0]);
                    child(&args[0], 0, path, table, out, paren)?;
                    child(&args[1], 1, path, table, out, false)?;
                    out.push_str("</msup>");
                    return Ok(());
                }
                "sqrt" if args.len() == 1 => {
                    out.push_str(&format!("<msqrt data-path=\"{attr}\">"));
                    child(&args[0], 0, path, table, out, false)?;
                    out.push_str("</msqrt>");
                    return Ok(());
                }
                _ => {}
            }
            let entry = table.get(name).ok_or_else(|| RenderError::MissingNotation(name.into()))?;
            out.push_str(&format!("<mrow data-path=\"{attr}\">"));
            match entry.fixity {
                Fixity::Infix if args.len() == 2 => {
                    let lp = needs_parens(pretty_prec(&args[0], table), entry.precedence, entry.assoc, false)
                        || matches!(&args[0], Term::Binder(k, ..) if *k != BinderKind::Deriv);
                    child(&args[0], 0, path, table, out, lp)?;
                    mo(out, &display_symbol(name, &entry.symbol));
                    let rp = needs_parens(pretty_prec(&args[1], table), entry.precedence, entry.assoc, true)
                        || starts_with_minus(&args[1])
                        || matches!(&args[1], Term::Binder(k, ..) if *k != BinderKind::Deriv);
                    child(&args[1], 1, path, table, out, rp)?;
                }
                Fixity::Prefix if args.len() == 1 => {
                    mo(out, &display_symbol(name, &entry.symbol));
                    let paren = pretty_prec(&args[0], table) <= entry.precedence || starts_with_minus(&args[0]);
                    child(&args[0], 0, path, table, out, paren && !args[0].is_leaf())?;
                }
                _ => {
                    if name == "app" && args.len() == 2 {
                        child(&args[0], 0, path, table, out, false)?;
                        mo(out, "(");
                        child(&args[1], 1, path, table, out, false)?;
                        mo(out, ")");
                    } else {
                        mo(out, &entry.symbol);
                        mo(out, "(");
                        for (i, a) in args.iter().enumerate() {
                            if i > 0 {
                                mo(out, ",");
                            }
                            child(a, i, path, table, out, false)?;
                        }
                        mo(out, ")");
                    }
                }
            }
            out.push_str("</mrow>");
        }
    }
    Ok(())
}

/// Stacked fractions, raised exponents and root signs group visually, so
/// they never need brackets as operands.
fn pretty_prec(t: &Term, table: &NotationTable) -> u8 {
    match t.op() {
        Some("div") | Some("pow") | Some("sqrt") => 100,
        _ => term_prec(t, table),
    }
}
