//! Completion: symbol abbreviations and keywords from the editor side,
//! names from failed prover lookups, and dictionary spell-checking of prose.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::markup::{names, MarkupTree};
use crate::range::Range;
use crate::sources::KeywordTable;

/// Most items a completion query returns.
pub const MAX_ITEMS: usize = 40;
/// Typed characters required before keywords are offered.
pub const MIN_KEYWORD_PREFIX: usize = 2;
pub const MAX_SUGGESTIONS: usize = 10;
pub const MAX_SPELL_DISTANCE: usize = 2;

const SYMBOL_NAMES: &[&str] = &[
    "Longleftarrow",
    "Longleftrightarrow",
    "Longrightarrow",
    "Rightarrow",
    "Leftarrow",
    "and",
    "exists",
    "forall",
    "in",
    "lambda",
    "le",
    "ge",
    "longleftarrow",
    "longleftrightarrow",
    "longrightarrow",
    "noteq",
    "not",
    "notin",
    "or",
    "rightarrow",
    "leftarrow",
    "times",
    "union",
    "inter",
    "subseteq",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompletionError {
    #[error("duplicate abbreviation {0}")]
    DuplicateAbbrev(String),
    #[error("stale completion")]
    Stale,
}

/// Abbreviations such as `==>` and the symbol names `\<...>` offered for
/// prefix completion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolAbbrevTable {
    abbrevs: Vec<(String, String)>,
    symbols: BTreeSet<String>,
}

impl Default for SymbolAbbrevTable {
    fn default() -> Self {
        let abbrevs = [
            ("==>", "\\<Longrightarrow>"),
            ("-->", "\\<longrightarrow>"),
            (":", "\\<in>"),
            ("|", "\\<or>"),
        ];
        SymbolAbbrevTable::new(abbrevs.iter().map(|(a, s)| (a.to_string(), s.to_string())), SYMBOL_NAMES.iter().copied())
            .expect("default abbreviations are unique")
    }
}

impl SymbolAbbrevTable {
    pub fn new<'a>(
        abbrevs: impl IntoIterator<Item = (String, String)>,
        symbol_names: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, CompletionError> {
        let mut seen = BTreeSet::new();
        let mut list = Vec::new();
        let mut symbols: BTreeSet<String> = symbol_names.into_iter().map(|n| format!("\\<{n}>")).collect();
        for (a, s) in abbrevs {
            if !seen.insert(a.clone()) {
                return Err(CompletionError::DuplicateAbbrev(a));
            }
            symbols.insert(s.clone());
            list.push((a, s));
        }
        Ok(SymbolAbbrevTable { abbrevs: list, symbols })
    }

    pub fn abbrevs(&self) -> &[(String, String)] {
        &self.abbrevs
    }
}

/// The sub-language at a caret.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageContext {
    pub name: String,
    pub symbols: bool,
    pub antiquotations: bool,
}

impl Default for LanguageContext {
    fn default() -> Self {
        LanguageContext { name: "outer".into(), symbols: true, antiquotations: false }
    }
}

impl LanguageContext {
    /// Innermost `language` markup around the caret; a caret at the end of
    /// a range still belongs to it.
    pub fn at(tree: &MarkupTree, caret: usize) -> Self {
        let mut ctx = LanguageContext::default();
        for (r, e) in tree.iter() {
            if e.name == names::LANGUAGE && r.start < caret && caret <= r.end {
                ctx = LanguageContext {
                    name: e.get("name").unwrap_or("unknown").to_string(),
                    symbols: e.get("symbols") == Some("true"),
                    antiquotations: e.get("antiquotations") == Some("true"),
                };
            }
        }
        ctx
    }

    pub fn is_document(&self) -> bool {
        self.name == "document"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemSource {
    Syntactic,
    Semantic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Keyword,
    Symbol,
    Name,
    Spell,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompletionItem {
    pub source: ItemSource,
    pub kind: ItemKind,
    /// The replaced range.
    pub original: Range,
    /// Text of the replaced range and length of the whole text when the item
    /// was computed; used to detect stale items.
    pub original_text: String,
    pub text_len: usize,
    pub replacement: String,
    pub label: String,
}

impl fmt::Display for CompletionItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let source = match self.source {
            ItemSource::Syntactic => "syntactic",
            ItemSource::Semantic => "semantic",
        };
        let kind = match self.kind {
            ItemKind::Keyword => "keyword",
            ItemKind::Symbol => "symbol",
            ItemKind::Name => "name",
            ItemKind::Spell => "spell",
        };
        write!(f, "{} {} {source} {kind} {}", self.original.start, self.original.end, self.replacement)
    }
}

fn item(source: ItemSource, kind: ItemKind, text: &str, original: Range, replacement: &str) -> CompletionItem {
    CompletionItem {
        source,
        kind,
        original,
        original_text: original.slice(text).to_string(),
        text_len: text.len(),
        replacement: replacement.to_string(),
        label: replacement.to_string(),
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Start of the identifier that ends at `caret`.
fn word_start(text: &str, caret: usize) -> usize {
    text[..caret].char_indices().rev().take_while(|(_, c)| is_word_char(*c)).last().map_or(caret, |(i, _)| i)
}

/// Editor-side completion at `caret`: the longest symbol abbreviation
/// ending there, symbol names after `\<`, and keywords extending the
/// identifier before the caret.
pub fn syntactic_complete(
    text: &str,
    caret: usize,
    keywords: &KeywordTable,
    symbols: &SymbolAbbrevTable,
    ctx: &LanguageContext,
    frequency: &HashMap<String, usize>,
) -> Vec<CompletionItem> {
    let caret = caret.min(text.len());
    if !text.is_char_boundary(caret) {
        return Vec::new();
    }
    let before = &text[..caret];
    // (match length, item)
    let mut found: Vec<(usize, CompletionItem)> = Vec::new();
    if ctx.symbols {
        if let Some((abbrev, symbol)) = symbols
            .abbrevs
            .iter()
            .filter(|(a, _)| before.ends_with(a.as_str()))
            .max_by(|x, y| x.0.len().cmp(&y.0.len()).then(y.1.cmp(&x.1)))
        {
            let r = Range::new(caret - abbrev.len(), caret);
            found.push((abbrev.len(), item(ItemSource::Syntactic, ItemKind::Symbol, text, r, symbol)));
        }
        if let Some(open) = before.rfind("\\<") {
            let partial = &before[open..];
            if partial[2..].chars().all(|c| c.is_ascii_alphanumeric()) {
                let r = Range::new(open, caret);
                for s in symbols.symbols.iter().filter(|s| s.starts_with(partial) && s.as_str() != partial) {
                    found.push((partial.len(), item(ItemSource::Syntactic, ItemKind::Symbol, text, r, s)));
                }
            }
        }
    }
    if !ctx.is_document() {
        let start = word_start(text, caret);
        let prefix = &text[start..caret];
        if prefix.chars().count() >= MIN_KEYWORD_PREFIX {
            let r = Range::new(start, caret);
            let mut words: BTreeSet<&str> = keywords.commands().collect();
            words.extend(keywords.minors().filter(|m| m.chars().all(is_word_char)));
            for k in words.into_iter().filter(|k| k.starts_with(prefix) && *k != prefix) {
                found.push((prefix.len(), item(ItemSource::Syntactic, ItemKind::Keyword, text, r, k)));
            }
        }
    }
    let freq = |i: &CompletionItem| frequency.get(&i.replacement).copied().unwrap_or(0);
    found.sort_by(|(la, a), (lb, b)| {
        lb.cmp(la).then(freq(b).cmp(&freq(a))).then(a.replacement.cmp(&b.replacement))
    });
    found.dedup_by(|x, y| x.1.original == y.1.original && x.1.replacement == y.1.replacement);
    found.into_iter().map(|(_, i)| i).take(MAX_ITEMS).collect()
}

/// Name items from `completion` markup around the caret.
pub fn semantic_items(tree: &MarkupTree, text: &str, caret: usize) -> Vec<CompletionItem> {
    let mut out = Vec::new();
    for (r, e) in tree.iter() {
        if e.name != names::COMPLETION || !(r.start <= caret && caret <= r.end) || r.end > text.len() {
            continue;
        }
        for name in e.get("names").unwrap_or("").split(',').filter(|n| !n.is_empty()) {
            out.push(item(ItemSource::Semantic, ItemKind::Name, text, r, name));
        }
    }
    out
}

/// `no_completion` ranges of a markup tree.
pub fn no_completion_zones(tree: &MarkupTree) -> Vec<Range> {
    tree.iter().into_iter().filter(|(_, e)| e.name == names::NO_COMPLETION).map(|(r, _)| r).collect()
}

/// Semantic items first, then syntactic ones not made redundant by them.
/// Nothing at all inside a no-completion zone (both ends inclusive).
pub fn merge_completions(
    syntactic: &[CompletionItem],
    semantic: &[CompletionItem],
    zones: &[Range],
    caret: usize,
) -> Vec<CompletionItem> {
    if zones.iter().any(|z| z.start <= caret && caret <= z.end) {
        return Vec::new();
    }
    let mut out: Vec<CompletionItem> = Vec::new();
    for s in semantic {
        if !out.contains(s) {
            out.push(s.clone());
        }
    }
    for s in syntactic {
        let covered = semantic.iter().any(|m| {
            let strictly = m.original.contains(s.original) && m.original != s.original;
            strictly || (m.original == s.original && m.replacement == s.replacement)
        });
        if !covered {
            out.push(s.clone());
        }
    }
    out.truncate(MAX_ITEMS);
    out
}

/// Replaces the item's range; the new caret is after the replacement.
pub fn apply_completion(text: &str, item: &CompletionItem) -> Result<(String, usize), CompletionError> {
    let r = item.original;
    let valid = text.len() == item.text_len
        && r.end <= text.len()
        && text.is_char_boundary(r.start)
        && text.is_char_boundary(r.end)
        && r.slice(text) == item.original_text;
    if !valid {
        return Err(CompletionError::Stale);
    }
    let mut out = String::with_capacity(text.len() + item.replacement.len());
    out.push_str(&text[..r.start]);
    out.push_str(&item.replacement);
    out.push_str(&text[r.end..]);
    Ok((out, r.start + item.replacement.len()))
}

/// Full query against a node's markup: language context, both sources and
/// the merge.
pub fn complete(
    tree: &MarkupTree,
    text: &str,
    caret: usize,
    keywords: &KeywordTable,
    symbols: &SymbolAbbrevTable,
    frequency: &HashMap<String, usize>,
) -> Vec<CompletionItem> {
    let ctx = LanguageContext::at(tree, caret);
    let syntactic = syntactic_complete(text, caret, keywords, symbols, &ctx, frequency);
    let semantic = semantic_items(tree, text, caret);
    merge_completions(&syntactic, &semantic, &no_completion_zones(tree), caret)
}

#[derive(Debug, thiserror::Error)]
#[error("cannot read dictionary {path}: {source}")]
pub struct DictionaryError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dictionary {
    words: BTreeSet<String>,
}

impl Dictionary {
    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(content: &str) -> Self {
        let words = content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Dictionary { words }
    }

    pub fn load(path: &Path) -> Result<Self, DictionaryError> {
        std::fs::read_to_string(path)
            .map(|c| Dictionary::parse(&c))
            .map_err(|source| DictionaryError { path: path.display().to_string(), source })
    }

    /// The dictionary shipped with the crate.
    pub fn builtin() -> Self {
        Dictionary::parse(include_str!("../data/dictionary.txt"))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words within distance 2, closest first.
    pub fn suggestions(&self, word: &str) -> Vec<String> {
        let n = word.chars().count();
        let mut scored: Vec<(usize, &String)> = self
            .words
            .iter()
            .filter(|w| w.chars().count().abs_diff(n) <= MAX_SPELL_DISTANCE)
            .map(|w| (damerau_levenshtein(word, w), w))
            .filter(|(d, _)| *d <= MAX_SPELL_DISTANCE)
            .collect();
        scored.sort();
        scored.into_iter().take(MAX_SUGGESTIONS).map(|(_, w)| w.clone()).collect()
    }
}

/// Edit distance with insertion, deletion, substitution and transposition
/// of adjacent characters, where transposed characters may be edited
/// further (the unrestricted variant).
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    let inf = n + m;
    // d[i + 1][j + 1] is the distance of a[..i] and b[..j].
    let mut d = vec![vec![0usize; m + 2]; n + 2];
    d[0][0] = inf;
    for i in 0..=n {
        d[i + 1][0] = inf;
        d[i + 1][1] = i;
    }
    for j in 0..=m {
        d[0][j + 1] = inf;
        d[1][j + 1] = j;
    }
    let mut last_row: HashMap<char, usize> = HashMap::new();
    for i in 1..=n {
        let mut last_col = 0;
        for j in 1..=m {
            let k = last_row.get(&b[j - 1]).copied().unwrap_or(0);
            let l = last_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_col = j;
                0
            } else {
                1
            };
            d[i + 1][j + 1] = (d[i][j] + cost)
                .min(d[i + 1][j] + 1)
                .min(d[i][j + 1] + 1)
                .min(d[k][l] + (i - k - 1) + 1 + (j - l - 1));
        }
        last_row.insert(a[i - 1], i);
    }
    d[n + 1][m + 1]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpellFinding {
    pub range: Range,
    pub word: String,
    pub suggestions: Vec<String>,
}

/// Words of at least two letters with an optional apostrophe suffix
/// (`Hilbert's`), as (range of the whole word, stem).
fn words_in(text: &str, range: Range) -> Vec<(Range, &str)> {
    let s = range.slice(text);
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphabetic() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        while i < chars.len() && chars[i].1.is_alphabetic() {
            i += 1;
        }
        let stem_end = chars.get(i).map_or(s.len(), |c| c.0);
        let mut end = stem_end;
        if i + 1 < chars.len() && matches!(chars[i].1, '\'' | '\u{2019}') && chars[i + 1].1.is_alphabetic() {
            i += 1;
            while i < chars.len() && chars[i].1.is_alphabetic() {
                i += 1;
            }
            end = chars.get(i).map_or(s.len(), |c| c.0);
        }
        let stem = &s[start..stem_end];
        if stem.chars().count() >= 2 {
            out.push((Range::new(range.start + start, range.start + end), stem));
        }
    }
    out
}

/// Flags prose words missing from the dictionary.
pub fn spell_check(prose: &[Range], text: &str, dict: &Dictionary) -> Vec<SpellFinding> {
    let mut out = Vec::new();
    for &r in prose {
        if r.end > text.len() || !text.is_char_boundary(r.start) || !text.is_char_boundary(r.end) {
            continue;
        }
        for (range, stem) in words_in(text, r) {
            let lower = stem.to_lowercase();
            if !dict.contains(&lower) {
                out.push(SpellFinding { range, word: range.slice(text).to_string(), suggestions: dict.suggestions(&lower) });
            }
        }
    }
    out
}
