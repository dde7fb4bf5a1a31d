//! Document text: prose with `@{term "EXPR"}` antiquotations.

use crate::markup::{names, MarkupElem};
use crate::range::Range;
use crate::sources::{tokenize, CommandSpan, Token, TokenKind};

use super::{term_language, CheckContext, Out, Prover};

fn document_language() -> MarkupElem {
    MarkupElem::new(names::LANGUAGE)
        .with("name", "document")
        .with("symbols", false)
        .with("antiquotations", true)
}

/// Range of the body between its delimiters, in absolute offsets. The body
/// runs from the first argument token to the end of the command, so quotes
/// inside antiquotations of a string body are taken literally.
fn body_range(span: &CommandSpan, text: &str) -> Option<Range> {
    let args: Vec<&Token> = span.content().skip(1).collect();
    let first = args.first()?;
    if !matches!(first.kind, TokenKind::String | TokenKind::Cartouche) {
        return None;
    }
    let whole = Range::new(first.range.start, args.last()?.range.end);
    let s = whole.slice(text);
    let (open, close) = if first.kind == TokenKind::Cartouche { ("{*", "*}") } else { ("\"", "\"") };
    (s.len() >= open.len() + close.len() && s.starts_with(open) && s.ends_with(close))
        .then(|| Range::new(whole.start + open.len(), whole.end - close.len()))
}

struct Antiquote {
    range: Range,
    name: Range,
    arg: Option<Range>,
}

fn skip_ws(s: &str, mut i: usize) -> usize {
    while let Some(c) = s[i..].chars().next().filter(|c| c.is_whitespace()) {
        i += c.len_utf8();
    }
    i
}

/// Parses `@{NAME ARG?}` at `i` (pointing at `@{`). On failure returns the
/// range to blame: up to the next `}` or the end of the body.
fn parse_antiquote(body: &str, i: usize) -> Result<Antiquote, Range> {
    let fail = || {
        let end = body[i..].find('}').map_or(body.len(), |k| i + k + 1);
        Range::new(i, end)
    };
    let mut j = skip_ws(body, i + 2);
    let name_start = j;
    j += body[j..].find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(body.len() - j);
    if j == name_start {
        return Err(fail());
    }
    let name = Range::new(name_start, j);
    j = skip_ws(body, j);
    let arg = if body[j..].starts_with('"') {
        let close = body[j + 1..].find('"').ok_or_else(fail)?;
        let r = Range::new(j + 1, j + 1 + close);
        j = j + 1 + close + 1;
        Some(r)
    } else if body[j..].starts_with("{*") {
        let close = body[j + 2..].find("*}").ok_or_else(fail)?;
        let r = Range::new(j + 2, j + 2 + close);
        j = j + 2 + close + 2;
        Some(r)
    } else {
        None
    };
    j = skip_ws(body, j);
    if !body[j..].starts_with('}') {
        return Err(fail());
    }
    Ok(Antiquote { range: Range::new(i, j + 1), name, arg })
}

pub(super) fn check_text(prover: &Prover, span: &CommandSpan, text: &str, ctx: &CheckContext, out: &mut Out) {
    let Some(body) = body_range(span, text) else {
        let at = span.content().nth(1).map_or(span.content_range(), |t| t.range);
        out.error(at, "expected text body");
        return;
    };
    out.mark(body, document_language());
    let src = body.slice(text);
    let mut prose_from = 0;
    let mut prose = Vec::new();
    let mut i = 0;
    while let Some(k) = src[i..].find("@{") {
        let at = i + k;
        prose.push(Range::new(prose_from, at));
        match parse_antiquote(src, at) {
            Err(r) => {
                out.error(r.shift(body.start), "malformed antiquotation");
                i = r.end;
            }
            Ok(aq) => {
                let name = aq.name.slice(src);
                match (name, aq.arg) {
                    ("term", Some(arg)) => {
                        let abs = arg.shift(body.start);
                        out.mark(abs, term_language());
                        let tokens: Vec<Token> = tokenize(abs.slice(text), &prover.keywords)
                            .into_iter()
                            .map(|t| Token { range: t.range.shift(abs.start), ..t })
                            .collect();
                        let content: Vec<&Token> = tokens.iter().filter(|t| !t.kind.is_trivial()).collect();
                        if content.is_empty() {
                            out.error(aq.range.shift(body.start), "missing expression");
                        } else {
                            prover.eval_tokens(&content, text, ctx, out, abs);
                        }
                    }
                    ("term", None) => out.error(aq.range.shift(body.start), "missing term argument"),
                    _ => out.error(aq.range.shift(body.start), format!("unknown antiquotation {name}")),
                }
                i = aq.range.end;
            }
        }
        prose_from = i;
    }
    prose.push(Range::new(prose_from, src.len()));
    for r in prose {
        if !r.slice(src).trim().is_empty() {
            out.mark(r.shift(body.start), MarkupElem::new(names::WORDS));
        }
    }
}
