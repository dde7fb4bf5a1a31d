//! Source text: symbol interpretation, tokenization of the outer syntax and
//! segmentation into command spans.
//!
//! The outer syntax is deliberately small:
//!
//! ```text
//! IDENT     = [A-Za-z_][A-Za-z0-9_']*
//! NUMBER    = [0-9]+
//! STRING    = " chars-except-quote "
//! COMMENT   = (* ... *)        nested
//! CARTOUCHE = {* ... *}        not nested
//! ```
//!
//! Everything else is a one-symbol `punct` token, unless it matches a
//! symbolic minor keyword. Unterminated strings, comments and cartouches run
//! to the end of the text and are flagged `incomplete`.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::range::Range;

/// Name given to the span of text preceding the first command keyword.
pub const MALFORMED: &str = "<malformed>";

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_rest(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Length in bytes of a `\<IDENT>` escape at the start of `s`, if any.
pub fn symbol_escape_len(s: &str) -> Option<usize> {
    let rest = s.strip_prefix("\\<")?;
    let mut chars = rest.char_indices();
    match chars.next() {
        Some((_, c)) if is_ident_start(c) => {}
        _ => return None,
    }
    for (i, c) in chars {
        if c == '>' {
            return Some(2 + i + 1);
        }
        if !is_ident_rest(c) {
            return None;
        }
    }
    None
}

/// Splits text into symbols: single Unicode scalars or whole `\<IDENT>`
/// escapes. Concatenating the result reproduces the input.
pub fn symbol_explode(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let len = symbol_escape_len(&text[i..])
            .unwrap_or_else(|| text[i..].chars().next().map_or(1, char::len_utf8));
        out.push(&text[i..i + len]);
        i += len;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    CommandKeyword,
    MinorKeyword,
    Identifier,
    Number,
    String,
    Punct,
    Comment,
    Whitespace,
    Cartouche,
}

impl TokenKind {
    /// Whitespace and comments carry no command content.
    pub fn is_trivial(self) -> bool {
        matches!(self, TokenKind::Whitespace | TokenKind::Comment)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub kind: TokenKind,
    pub range: Range,
    /// Set for strings, comments and cartouches that run off the end of the text.
    pub incomplete: bool,
}

impl Token {
    pub fn source<'a>(&self, text: &'a str) -> &'a str {
        self.range.slice(text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeywordTable {
    commands: BTreeSet<String>,
    minors: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("keyword {0:?} is both a command and a minor keyword")]
pub struct KeywordClash(pub String);

impl KeywordTable {
    pub fn new<C, M>(commands: C, minors: M) -> Result<Self, KeywordClash>
    where
        C: IntoIterator,
        C::Item: Into<String>,
        M: IntoIterator,
        M::Item: Into<String>,
    {
        let commands: BTreeSet<String> = commands.into_iter().map(Into::into).collect();
        let minors: BTreeSet<String> = minors.into_iter().map(Into::into).collect();
        if let Some(k) = commands.intersection(&minors).next() {
            return Err(KeywordClash(k.clone()));
        }
        Ok(KeywordTable { commands, minors })
    }

    pub fn is_command(&self, word: &str) -> bool {
        self.commands.contains(word)
    }

    pub fn is_minor(&self, word: &str) -> bool {
        self.minors.contains(word)
    }

    pub fn commands(&self) -> impl Iterator<Item = &str> {
        self.commands.iter().map(String::as_str)
    }

    pub fn minors(&self) -> impl Iterator<Item = &str> {
        self.minors.iter().map(String::as_str)
    }

    /// Longest symbolic (non-identifier) minor keyword at the start of `s`.
    fn symbolic_minor_at(&self, s: &str) -> Option<usize> {
        self.minors
            .iter()
            .filter(|m| !m.starts_with(is_ident_start) && s.starts_with(m.as_str()))
            .map(String::len)
            .max()
    }
}

impl Default for KeywordTable {
    fn default() -> Self {
        // `imports` and `begin` continue a theory header rather than starting
        // a span of their own.
        KeywordTable::new(
            ["theory", "end", "def", "eval", "check", "load", "text"],
            ["imports", "begin", "=", ":", "|", "+", "*", "(", ")"],
        )
        .expect("default keyword table is disjoint")
    }
}

/// Scans `(* ... *)` with nesting; `i` points at the opening `(*`.
fn scan_comment(text: &str, i: usize) -> (usize, bool) {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut j = i;
    while j < bytes.len() {
        if bytes[j] == b'(' && bytes.get(j + 1) == Some(&b'*') {
            depth += 1;
            j += 2;
        } else if bytes[j] == b'*' && bytes.get(j + 1) == Some(&b')') {
            depth -= 1;
            j += 2;
            if depth == 0 {
                return (j, false);
            }
        } else {
            j += 1;
        }
    }
    (text.len(), true)
}

fn scan_delimited(text: &str, i: usize, open: &str, close: &str) -> (usize, bool) {
    match text[i + open.len()..].find(close) {
        Some(k) => (i + open.len() + k + close.len(), false),
        None => (text.len(), true),
    }
}

/// Tokenizes the whole text. The result always covers the text exactly.
pub fn tokenize(text: &str, table: &KeywordTable) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        let c = rest.chars().next().expect("non-empty");
        let (kind, end, incomplete) = if c.is_whitespace() {
            let len = rest.find(|ch: char| !ch.is_whitespace()).unwrap_or(rest.len());
            (TokenKind::Whitespace, i + len, false)
        } else if rest.starts_with("(*") {
            let (end, inc) = scan_comment(text, i);
            (TokenKind::Comment, end, inc)
        } else if rest.starts_with("{*") {
            let (end, inc) = scan_delimited(text, i, "{*", "*}");
            (TokenKind::Cartouche, end, inc)
        } else if c == '"' {
            let (end, inc) = scan_delimited(text, i, "\"", "\"");
            (TokenKind::String, end, inc)
        } else if is_ident_start(c) {
            let len = rest.find(|ch: char| !is_ident_rest(ch)).unwrap_or(rest.len());
            let word = &rest[..len];
            let kind = if table.is_command(word) {
                TokenKind::CommandKeyword
            } else if table.is_minor(word) {
                TokenKind::MinorKeyword
            } else {
                TokenKind::Identifier
            };
            (kind, i + len, false)
        } else if c.is_ascii_digit() {
            let len = rest.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(rest.len());
            (TokenKind::Number, i + len, false)
        } else if let Some(len) = table.symbolic_minor_at(rest) {
            (TokenKind::Punct, i + len, false)
        } else {
            let len = symbol_escape_len(rest).unwrap_or(c.len_utf8());
            (TokenKind::Punct, i + len, false)
        };
        tokens.push(Token { kind, range: Range::new(i, end), incomplete });
        i = end;
    }
    tokens
}

/// The unit of prover processing: one command keyword with its arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CommandSpan {
    pub name: String,
    pub tokens: Vec<Token>,
    pub range: Range,
}

impl CommandSpan {
    pub fn is_malformed(&self) -> bool {
        self.name == MALFORMED
    }

    pub fn source<'a>(&self, text: &'a str) -> &'a str {
        self.range.slice(text)
    }

    /// Tokens other than whitespace and comments.
    pub fn content(&self) -> impl Iterator<Item = &Token> + '_ {
        self.tokens.iter().filter(|t| !t.kind.is_trivial())
    }

    /// Range from the first to the last non-trivial token.
    pub fn content_range(&self) -> Range {
        let mut content = self.content();
        match content.next() {
            None => Range::point(self.range.end),
            Some(first) => {
                let last = content.last().unwrap_or(first);
                Range::new(first.range.start, last.range.end)
            }
        }
    }

    /// Same span moved by `delta` bytes.
    pub fn shifted(&self, delta: isize) -> CommandSpan {
        let mv = |r: Range| {
            Range::new(
                (r.start as isize + delta) as usize,
                (r.end as isize + delta) as usize,
            )
        };
        CommandSpan {
            name: self.name.clone(),
            tokens: self
                .tokens
                .iter()
                .map(|t| Token { range: mv(t.range), ..t.clone() })
                .collect(),
            range: mv(self.range),
        }
    }
}

/// Groups tokens into command spans.
///
/// Every command keyword starts a span. Whitespace and comments after the
/// last non-trivial token of a span belong to the following span, so a span
/// begins with a run of trivia and then its keyword. Text before the first
/// command keyword forms a `<malformed>` span.
pub fn parse_spans(tokens: &[Token], text: &str) -> Vec<Arc<CommandSpan>> {
    if tokens.is_empty() {
        return Vec::new();
    }
    // Index of the first token of each span.
    let mut starts = Vec::new();
    let mut trivia_from: Option<usize> = None;
    let mut seen_content = false;
    for (i, tok) in tokens.iter().enumerate() {
        if tok.kind.is_trivial() {
            trivia_from.get_or_insert(i);
            continue;
        }
        if tok.kind == TokenKind::CommandKeyword {
            let start = if seen_content { trivia_from.unwrap_or(i) } else { 0 };
            if starts.last() != Some(&start) {
                starts.push(start);
            }
        } else if !seen_content {
            starts.push(0);
        }
        seen_content = true;
        trivia_from = None;
    }
    if starts.is_empty() {
        starts.push(0);
    }
    let mut spans = Vec::with_capacity(starts.len());
    for (n, &s) in starts.iter().enumerate() {
        let e = starts.get(n + 1).copied().unwrap_or(tokens.len());
        let toks = tokens[s..e].to_vec();
        let name = toks
            .iter()
            .find(|t| !t.kind.is_trivial())
            .filter(|t| t.kind == TokenKind::CommandKeyword)
            .map_or_else(|| MALFORMED.to_string(), |t| t.source(text).to_string());
        let range = Range::new(toks[0].range.start, toks[toks.len() - 1].range.end);
        spans.push(Arc::new(CommandSpan { name, tokens: toks, range }));
    }
    spans
}

/// Tokenizes and segments in one go.
pub fn parse_text(text: &str, table: &KeywordTable) -> Vec<Arc<CommandSpan>> {
    parse_spans(&tokenize(text, table), text)
}
