//! The toy back-end prover.
//!
//! Commands of the theory language:
//!
//! ```text
//! theory NAME imports N* begin
//! def NAME = EXPR
//! eval EXPR
//! check EXPR : int
//! load "FILE"            FILE holds `def` lines
//! text "PROSE" | text {* PROSE *}
//! end
//! EXPR   = TERM ("+" TERM)*
//! TERM   = FACTOR ("*" FACTOR)*
//! FACTOR = NUMBER | IDENT | "(" EXPR ")"
//! ```
//!
//! Checking is a pure function of the command source, the incoming context
//! and the content of referenced blobs.

mod namespace;
mod text;

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::document::{Blob, NodeName};
use crate::markup::{names, MarkupElem, MarkupEntry};
use crate::range::Range;
use crate::sources::{parse_text, CommandSpan, KeywordTable, Token, TokenKind};

pub use namespace::{Alternatives, Entity, EntityKind, Namespace};

/// Default cap on completion alternatives reported for a failed lookup.
pub const DEFAULT_ALTERNATIVES_LIMIT: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Information,
}

impl Severity {
    pub fn markup_name(self) -> &'static str {
        match self {
            Severity::Error => names::ERROR,
            Severity::Warning => names::WARNING,
            Severity::Information => names::INFORMATION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Local to the command span.
    pub range: Range,
    pub message: String,
    pub alternatives: Alternatives,
}

/// The context a command is checked in: everything defined before it,
/// including the exported contexts of imported nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckContext {
    pub node: NodeName,
    pub constants: Namespace,
    pub theories: Namespace,
    pub theory: Option<String>,
    pub closed: bool,
    /// Header diagnostics, reported by the theory command.
    pub header_errors: Vec<String>,
}

impl CheckContext {
    pub fn new(node: NodeName) -> Self {
        CheckContext {
            node,
            constants: Namespace::new(),
            theories: Namespace::new(),
            theory: None,
            closed: false,
            header_errors: Vec::new(),
        }
    }

    /// Makes the definitions of an imported node's final context visible.
    pub fn import(&mut self, other: &CheckContext) {
        self.constants.absorb(&other.constants);
        self.theories.absorb(&other.theories);
    }
}

pub trait BlobLookup {
    fn blob(&self, path: &str) -> Option<Arc<Blob>>;
}

impl BlobLookup for HashMap<String, Arc<Blob>> {
    fn blob(&self, path: &str) -> Option<Arc<Blob>> {
        self.get(path).cloned()
    }
}

/// File name referenced by a `load` command, without its quotes.
pub fn load_path<'a>(span: &CommandSpan, text: &'a str) -> Option<&'a str> {
    if span.name != "load" {
        return None;
    }
    let file = span.content().nth(1).filter(|t| t.kind == TokenKind::String && !t.incomplete)?;
    let src = file.source(text);
    Some(&src[1..src.len() - 1])
}

pub struct NoBlobs;

impl BlobLookup for NoBlobs {
    fn blob(&self, _: &str) -> Option<Arc<Blob>> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    /// Markup in span-local coordinates.
    pub entries: Vec<MarkupEntry>,
    pub diagnostics: Vec<Diagnostic>,
    pub context: CheckContext,
    /// Result of an `eval`.
    pub value: Option<BigUint>,
}

/// Collects markup and diagnostics for one span.
struct Out {
    base: usize,
    markup: bool,
    entries: Vec<MarkupEntry>,
    diagnostics: Vec<Diagnostic>,
}

impl Out {
    fn new(base: usize) -> Self {
        Out { base, markup: true, entries: Vec::new(), diagnostics: Vec::new() }
    }

    fn silent() -> Self {
        Out { base: 0, markup: false, entries: Vec::new(), diagnostics: Vec::new() }
    }

    fn mark(&mut self, range: Range, elem: MarkupElem) {
        if self.markup && !range.is_empty() {
            self.entries.push(MarkupEntry::new(range.unshift(self.base), elem));
        }
    }

    fn diag(&mut self, severity: Severity, range: Range, message: impl Into<String>, alternatives: Alternatives) {
        let message = message.into();
        let local = range.unshift(self.base);
        if self.markup {
            self.entries.push(MarkupEntry::new(
                local,
                MarkupElem::new(severity.markup_name()).with("message", &message),
            ));
            if !alternatives.names.is_empty() {
                self.entries.push(MarkupEntry::new(
                    local,
                    MarkupElem::new(names::COMPLETION)
                        .with("names", alternatives.names.join(","))
                        .with("truncated", alternatives.truncated),
                ));
            }
        }
        self.diagnostics.push(Diagnostic { severity, range: local, message, alternatives });
    }

    fn error(&mut self, range: Range, message: impl Into<String>) {
        self.diag(Severity::Error, range, message, Alternatives::default());
    }

    fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }
}

fn entity_elem(e: &Entity, role: &str) -> MarkupElem {
    MarkupElem::new(names::ENTITY)
        .with("kind", e.kind.as_str())
        .with("name", &e.name)
        .with("ref-node", &e.def_node)
        .with("def-start", e.def_range.start)
        .with("def-end", e.def_range.end)
        .with("role", role)
}

fn term_language() -> MarkupElem {
    MarkupElem::new(names::LANGUAGE)
        .with("name", "term")
        .with("symbols", true)
        .with("antiquotations", false)
}

#[derive(Clone, Debug)]
pub struct Prover {
    pub alternatives_limit: usize,
    pub keywords: KeywordTable,
}

impl Default for Prover {
    fn default() -> Self {
        Prover { alternatives_limit: DEFAULT_ALTERNATIVES_LIMIT, keywords: KeywordTable::default() }
    }
}

/// Recursive-descent evaluator over the non-trivial tokens of an expression.
struct ExprParser<'a> {
    prover: &'a Prover,
    tokens: &'a [&'a Token],
    src: &'a str,
    pos: usize,
    ctx: &'a CheckContext,
    /// Where a missing operand is reported when the token list runs out.
    eof: Range,
}

struct SyntaxError;

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos).copied()
    }

    fn peek_is(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.source(self.src) == s)
    }

    fn end_range(&self) -> Range {
        self.tokens.last().map_or(self.eof, |t| Range::point(t.range.end))
    }

    fn expr(&mut self, out: &mut Out) -> Result<Option<BigUint>, SyntaxError> {
        let mut acc = self.term(out)?;
        while self.peek_is("+") {
            self.pos += 1;
            let rhs = self.term(out)?;
            acc = acc.zip(rhs).map(|(a, b)| a + b);
        }
        Ok(acc)
    }

    fn term(&mut self, out: &mut Out) -> Result<Option<BigUint>, SyntaxError> {
        let mut acc = self.factor(out)?;
        while self.peek_is("*") {
            self.pos += 1;
            let rhs = self.factor(out)?;
            acc = acc.zip(rhs).map(|(a, b)| a * b);
        }
        Ok(acc)
    }

    fn factor(&mut self, out: &mut Out) -> Result<Option<BigUint>, SyntaxError> {
        let Some(tok) = self.peek() else {
            out.error(self.end_range(), "missing expression");
            return Err(SyntaxError);
        };
        let s = tok.source(self.src);
        match tok.kind {
            TokenKind::Number => {
                self.pos += 1;
                Ok(Some(s.parse().expect("digits parse")))
            }
            TokenKind::Identifier => {
                self.pos += 1;
                match self.ctx.constants.lookup(s, self.prover.alternatives_limit) {
                    Ok(entity) => {
                        out.mark(tok.range, entity_elem(&entity, "ref"));
                        Ok(entity.value.clone())
                    }
                    Err(alternatives) => {
                        out.diag(Severity::Error, tok.range, format!("undefined: {s}"), alternatives);
                        Ok(None)
                    }
                }
            }
            TokenKind::Punct if s == "(" => {
                self.pos += 1;
                let v = self.expr(out)?;
                if self.peek_is(")") {
                    self.pos += 1;
                    Ok(v)
                } else {
                    let at = self.peek().map_or(self.end_range(), |t| t.range);
                    out.error(at, "expected )");
                    Err(SyntaxError)
                }
            }
            _ => {
                out.error(tok.range, format!("unexpected {s}"));
                Err(SyntaxError)
            }
        }
    }
}

impl Prover {
    pub fn new(alternatives_limit: usize) -> Self {
        Prover { alternatives_limit, ..Default::default() }
    }

    /// Evaluates a complete expression; any trailing token is an error.
    fn eval_tokens(
        &self,
        tokens: &[&Token],
        src: &str,
        ctx: &CheckContext,
        out: &mut Out,
        eof: Range,
    ) -> Option<BigUint> {
        let mut p = ExprParser { prover: self, tokens, src, pos: 0, ctx, eof };
        let value = p.expr(out).ok()?;
        if let Some(t) = p.peek() {
            out.error(t.range, format!("unexpected {}", t.source(src)));
            return None;
        }
        value
    }

    /// Checks one command span against `ctx`. On any error the returned
    /// context equals the incoming one.
    pub fn check_command(
        &self,
        span: &CommandSpan,
        text: &str,
        ctx: &CheckContext,
        blobs: &dyn BlobLookup,
    ) -> CheckOutcome {
        let mut out = Out::new(span.range.start);
        let content: Vec<&Token> = span.content().collect();
        for t in &content {
            if t.kind == TokenKind::Punct && t.source(text) == "|" {
                out.mark(t.range, MarkupElem::new(names::NO_COMPLETION));
            }
        }
        for t in span.tokens.iter().filter(|t| t.incomplete) {
            let what = match t.kind {
                TokenKind::Comment => "comment",
                TokenKind::Cartouche => "cartouche",
                _ => "string",
            };
            out.error(t.range, format!("unterminated {what}"));
        }
        let mut next = ctx.clone();
        let mut value = None;
        if !out.has_errors() {
            let args = content.get(1..).unwrap_or(&[]);
            match span.name.as_str() {
                _ if span.is_malformed() => {
                    if !content.is_empty() {
                        out.error(span.content_range(), "malformed command");
                    }
                }
                _ if ctx.closed => out.error(content[0].range, "theory already closed"),
                "theory" => self.check_theory(args, text, ctx, &mut next, &mut out, content[0].range),
                "def" => {
                    self.check_def(args, text, ctx, &mut next, &mut out, content[0].range);
                }
                "eval" => {
                    if let Some((first, last)) = args.first().zip(args.last()) {
                        out.mark(Range::new(first.range.start, last.range.end), term_language());
                    }
                    value = self.eval_tokens(args, text, ctx, &mut out, content[0].range);
                    if let Some(v) = &value {
                        out.mark(span.content_range(), MarkupElem::new(names::RESULT).with("value", v));
                    }
                }
                "check" => self.check_check(args, text, ctx, &mut out, content[0].range),
                "load" => self.check_load(args, text, ctx, &mut next, &mut out, content[0].range, blobs),
                "text" => text::check_text(self, span, text, ctx, &mut out),
                "end" => {
                    if let Some(t) = args.first() {
                        out.error(t.range, format!("unexpected {}", t.source(text)));
                    } else {
                        next.closed = true;
                    }
                }
                other => out.error(content[0].range, format!("unknown command {other}")),
            }
        }
        if out.has_errors() {
            next = ctx.clone();
            if span.name == "theory" {
                next.header_errors.clear();
            }
            value = None;
        }
        CheckOutcome { entries: out.entries, diagnostics: out.diagnostics, context: next, value }
    }

    /// Checks the body of a `text` command.
    pub fn check_text_command(
        &self,
        span: &CommandSpan,
        text: &str,
        ctx: &CheckContext,
    ) -> CheckOutcome {
        let mut out = Out::new(span.range.start);
        text::check_text(self, span, text, ctx, &mut out);
        CheckOutcome { entries: out.entries, diagnostics: out.diagnostics, context: ctx.clone(), value: None }
    }

    fn check_theory(
        &self,
        args: &[&Token],
        text: &str,
        ctx: &CheckContext,
        next: &mut CheckContext,
        out: &mut Out,
        keyword: Range,
    ) {
        for e in &ctx.header_errors {
            out.error(keyword, e.clone());
        }
        next.header_errors.clear();
        if ctx.theory.is_some() {
            out.error(keyword, "theory already started");
            return;
        }
        let Some(name) = args.first().filter(|t| t.kind == TokenKind::Identifier) else {
            out.error(args.first().map_or(keyword, |t| t.range), "expected theory name");
            return;
        };
        let mut rest = &args[1..];
        if rest.first().is_some_and(|t| t.source(text) == "imports") {
            rest = &rest[1..];
            while let Some(t) = rest.first().filter(|t| t.kind == TokenKind::Identifier) {
                if let Some(e) = ctx.theories.get(t.source(text)) {
                    out.mark(t.range, entity_elem(e, "ref"));
                }
                rest = &rest[1..];
            }
        }
        match rest {
            [b] if b.source(text) == "begin" => {}
            [] => out.error(Range::point(args[args.len() - 1].range.end), "expected begin"),
            [t, ..] => out.error(t.range, format!("unexpected {}", t.source(text))),
        }
        let entity = Entity {
            name: name.source(text).to_string(),
            kind: EntityKind::Theory,
            def_node: ctx.node.clone(),
            def_range: name.range,
            value: None,
        };
        out.mark(name.range, entity_elem(&entity, "def"));
        if !next.theories.define(entity) {
            out.error(name.range, format!("duplicate theory {}", name.source(text)));
        }
        next.theory = Some(name.source(text).to_string());
    }

    /// `def NAME = EXPR`; returns the defined entity on success.
    fn check_def(
        &self,
        args: &[&Token],
        text: &str,
        ctx: &CheckContext,
        next: &mut CheckContext,
        out: &mut Out,
        keyword: Range,
    ) -> Option<Arc<Entity>> {
        let name = match args.first() {
            Some(t) if t.kind == TokenKind::Identifier => *t,
            other => {
                out.error(other.map_or(keyword, |t| t.range), "expected name");
                return None;
            }
        };
        match args.get(1) {
            Some(t) if t.source(text) == "=" => {}
            other => {
                out.error(other.map_or(Range::point(name.range.end), |t| t.range), "expected =");
                return None;
            }
        }
        let expr = &args[2..];
        if let Some((first, last)) = expr.first().zip(expr.last()) {
            out.mark(Range::new(first.range.start, last.range.end), term_language());
        }
        let value = self.eval_tokens(expr, text, ctx, out, args[1].range)?;
        let n = name.source(text);
        let entity = Entity {
            name: n.to_string(),
            kind: EntityKind::Constant,
            def_node: ctx.node.clone(),
            def_range: name.range,
            value: Some(value),
        };
        out.mark(name.range, entity_elem(&entity, "def"));
        if !next.constants.define(entity) {
            out.error(name.range, format!("duplicate definition of {n}"));
            return None;
        }
        next.constants.get(n).cloned()
    }

    fn check_check(&self, args: &[&Token], text: &str, ctx: &CheckContext, out: &mut Out, keyword: Range) {
        let colon = args.iter().position(|t| t.source(text) == ":");
        let expr = &args[..colon.unwrap_or(args.len())];
        if let Some((first, last)) = expr.first().zip(expr.last()) {
            out.mark(Range::new(first.range.start, last.range.end), term_language());
        }
        let Some(colon) = colon else {
            self.eval_tokens(expr, text, ctx, out, keyword);
            out.error(args.last().map_or(keyword, |t| t.range), "missing type constraint");
            return;
        };
        out.mark(args[colon].range, MarkupElem::new(names::NO_COMPLETION));
        self.eval_tokens(expr, text, ctx, out, keyword);
        match &args[colon + 1..] {
            [ty] if ty.source(text) == "int" => {}
            [ty] => out.error(ty.range, format!("unknown type {}", ty.source(text))),
            [] => out.error(args[colon].range, "missing type"),
            [_, t, ..] => out.error(t.range, format!("unexpected {}", t.source(text))),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn check_load(
        &self,
        args: &[&Token],
        text: &str,
        ctx: &CheckContext,
        next: &mut CheckContext,
        out: &mut Out,
        keyword: Range,
        blobs: &dyn BlobLookup,
    ) {
        let file = match args {
            [t] if t.kind == TokenKind::String => *t,
            [] => return out.error(keyword, "expected file name"),
            [t, ..] => return out.error(t.range, "expected a single file name"),
        };
        let src = file.source(text);
        let path = &src[1..src.len() - 1];
        let Some(blob) = blobs.blob(path) else {
            return out.error(file.range, format!("no such file: {path}"));
        };
        out.mark(
            file.range,
            MarkupElem::new(names::BLOB).with("name", path).with("digest", &blob.digest),
        );
        let blob_node = match NodeName::new(path) {
            Ok(n) => n,
            Err(e) => return out.error(file.range, e.to_string()),
        };
        let mut inner = ctx.clone();
        inner.node = blob_node;
        let mut defined = Vec::new();
        for span in parse_text(&blob.content, &self.keywords) {
            let content: Vec<&Token> = span.content().collect();
            if content.is_empty() {
                continue;
            }
            let mut sink = Out::silent();
            if span.name != "def" {
                sink.error(span.content_range(), "expected def");
            } else {
                let mut after = inner.clone();
                if let Some(e) = self.check_def(&content[1..], &blob.content, &inner, &mut after, &mut sink, content[0].range) {
                    defined.push(e);
                    inner = after;
                }
            }
            if let Some(d) = sink.diagnostics.first() {
                let line = blob.content[..d.range.start].matches('\n').count() + 1;
                return out.error(file.range, format!("{path}:{line}: {}", d.message));
            }
        }
        for e in defined {
            next.constants.define(e.as_ref().clone());
        }
    }
}
