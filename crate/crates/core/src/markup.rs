//! Markup trees: untyped name + properties elements over byte ranges.
//!
//! Reports arrive asynchronously and in any order, so insertion never
//! rejects: an incoming range that partially overlaps siblings is split at
//! their boundaries, the overlapping pieces nest inside those siblings and
//! the remainder becomes a new sibling. Comparisons go through
//! [`MarkupTree::flatten`], which depends only on which elements cover
//! which bytes and not on the shape of the tree.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::document::{NodeName, Snapshot};
use crate::execution::ExecId;
use crate::range::Range;

pub mod names {
    pub const ERROR: &str = "error";
    pub const WARNING: &str = "warning";
    pub const INFORMATION: &str = "information";
    pub const ENTITY: &str = "entity";
    pub const LANGUAGE: &str = "language";
    pub const NO_COMPLETION: &str = "no_completion";
    pub const COMPLETION: &str = "completion";
    pub const WORDS: &str = "words";
    pub const SPELL: &str = "spell";
    pub const SENDBACK: &str = "sendback";
    pub const RESULT: &str = "result";
    pub const BLOB: &str = "blob";
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MarkupElem {
    pub name: String,
    #[serde(default, rename = "props")]
    pub properties: Vec<(String, String)>,
}

impl MarkupElem {
    pub fn new(name: impl Into<String>) -> Self {
        MarkupElem { name: name.into(), properties: Vec::new() }
    }

    /// Adds or replaces a property, keeping keys unique.
    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        let key = key.into();
        let value = value.to_string();
        match self.properties.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.properties.push((key, value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.properties.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// One markup element over a range.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarkupEntry {
    #[serde(flatten)]
    pub range: Range,
    #[serde(flatten)]
    pub elem: MarkupElem,
}

impl MarkupEntry {
    pub fn new(range: Range, elem: MarkupElem) -> Self {
        MarkupEntry { range, elem }
    }
}

/// Markup produced by one task, in coordinates local to its command span.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub exec_id: ExecId,
    pub entries: Vec<MarkupEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkupNode {
    pub range: Range,
    pub elem: MarkupElem,
    pub children: MarkupTree,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkupTree {
    pub entries: Vec<MarkupNode>,
}

impl MarkupTree {
    pub fn new() -> Self {
        MarkupTree::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of nodes in the tree.
    pub fn len(&self) -> usize {
        self.entries.iter().map(|n| 1 + n.children.len()).sum()
    }

    /// Inserts one element. Empty ranges carry no markup and are dropped.
    pub fn insert(&mut self, range: Range, elem: MarkupElem) {
        if range.is_empty() {
            return;
        }
        let nodes = &mut self.entries;
        let lo = nodes.partition_point(|n| n.range.end <= range.start);
        let hi = nodes.partition_point(|n| n.range.start < range.end);
        if lo < hi {
            let first = &nodes[lo];
            if hi - lo == 1 && first.range.contains(range) {
                nodes[lo].children.insert(range, elem);
                return;
            }
        }
        // Overlapping siblings: at most one sticks out on each side.
        let mut free = range;
        let mut adopt_from = lo;
        let mut adopt_to = hi;
        if lo < hi && nodes[lo].range.start < range.start {
            let part = nodes[lo].range.intersect(range).expect("overlapping");
            free.start = nodes[lo].range.end;
            nodes[lo].children.insert(part, elem.clone());
            adopt_from = lo + 1;
        }
        if adopt_from < hi && nodes[hi - 1].range.end > range.end {
            let part = nodes[hi - 1].range.intersect(range).expect("overlapping");
            free.end = nodes[hi - 1].range.start;
            nodes[hi - 1].children.insert(part, elem.clone());
            adopt_to = hi - 1;
        }
        if free.is_empty() {
            return;
        }
        let adopted: Vec<MarkupNode> = nodes.drain(adopt_from..adopt_to).collect();
        let node = MarkupNode { range: free, elem, children: MarkupTree { entries: adopted } };
        nodes.insert(adopt_from, node);
    }

    /// Returns a new tree with the report's entries added, shifted by
    /// `span_offset`.
    pub fn merge_report(&self, report: &Report, span_offset: usize) -> MarkupTree {
        let mut tree = self.clone();
        for e in &report.entries {
            tree.insert(e.range.shift(span_offset), e.elem.clone());
        }
        tree
    }

    /// All nodes in document order, parents before their children.
    pub fn iter(&self) -> Vec<(Range, &MarkupElem)> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a MarkupTree, out: &mut Vec<(Range, &'a MarkupElem)>) {
            for n in &t.entries {
                out.push((n.range, &n.elem));
                walk(&n.children, out);
            }
        }
        walk(self, &mut out);
        out
    }

    /// Entries intersecting `range` whose name is in `filter` (an empty
    /// filter accepts everything), outermost first. An empty query range
    /// selects entries containing that offset.
    pub fn query(&self, range: Range, filter: &[&str]) -> Vec<(Range, MarkupElem)> {
        let hits = |r: Range| {
            if range.is_empty() {
                r.start <= range.start && range.start < r.end
            } else {
                r.overlaps(range)
            }
        };
        let mut out = Vec::new();
        fn walk(
            t: &MarkupTree,
            hits: &dyn Fn(Range) -> bool,
            filter: &[&str],
            out: &mut Vec<(Range, MarkupElem)>,
        ) {
            for n in &t.entries {
                if !hits(n.range) {
                    continue;
                }
                if filter.is_empty() || filter.contains(&n.elem.name.as_str()) {
                    out.push((n.range, n.elem.clone()));
                }
                walk(&n.children, hits, filter, out);
            }
        }
        walk(self, &hits, filter, &mut out);
        out
    }

    /// Canonical form: for each distinct element, the maximal runs of bytes
    /// it covers with constant multiplicity, one entry per unit of
    /// multiplicity, sorted by (start, end, name, properties). Two trees have
    /// the same flattening iff every byte carries the same multiset of
    /// elements.
    pub fn flatten(&self) -> Vec<(Range, MarkupElem)> {
        let mut by_elem: BTreeMap<&MarkupElem, Vec<Range>> = BTreeMap::new();
        for (r, e) in self.iter() {
            by_elem.entry(e).or_default().push(r);
        }
        let mut out = Vec::new();
        for (elem, ranges) in by_elem {
            let mut events: BTreeMap<usize, isize> = BTreeMap::new();
            for r in ranges {
                *events.entry(r.start).or_default() += 1;
                *events.entry(r.end).or_default() -= 1;
            }
            let mut runs: Vec<(Range, isize)> = Vec::new();
            let mut depth = 0;
            let mut prev = 0;
            for (at, delta) in events {
                if depth > 0 && at > prev {
                    match runs.last_mut() {
                        Some((r, d)) if *d == depth && r.end == prev => r.end = at,
                        _ => runs.push((Range::new(prev, at), depth)),
                    }
                }
                depth += delta;
                prev = at;
            }
            for (r, d) in runs {
                for _ in 0..d {
                    out.push((r, elem.clone()));
                }
            }
        }
        out.sort_by(|a, b| (a.0.start, a.0.end, &a.1).cmp(&(b.0.start, b.0.end, &b.1)));
        out
    }

    /// Flattened dump, one `START END NAME key=value ...` line per entry.
    pub fn dump(&self) -> String {
        dump_entries(&self.flatten())
    }
}

fn quote_value(v: &str) -> String {
    let plain = !v.is_empty() && v.chars().all(|c| !c.is_whitespace() && c != '"' && c != '\\');
    if plain {
        v.to_string()
    } else {
        serde_json::to_string(v).expect("strings serialize")
    }
}

pub fn dump_line(range: Range, elem: &MarkupElem) -> String {
    let mut line = format!("{} {} {}", range.start, range.end, elem.name);
    for (k, v) in &elem.properties {
        let _ = write!(line, " {k}={}", quote_value(v));
    }
    line
}

pub fn dump_entries(entries: &[(Range, MarkupElem)]) -> String {
    let mut out = String::new();
    for (r, e) in entries {
        out.push_str(&dump_line(*r, e));
        out.push('\n');
    }
    out
}

/// Follows an `entity` reference at `offset` to its definition. The
/// innermost entity wins; targets that no longer exist give `None`.
pub fn resolve_hyperlink(snapshot: &Snapshot, offset: usize) -> Option<(NodeName, Range)> {
    let hits = snapshot.markup.query(Range::point(offset), &[names::ENTITY]);
    let (_, elem) = hits.last()?;
    let target = || -> Option<(NodeName, Range)> {
        let node = NodeName::new(elem.get("ref-node")?).ok()?;
        let start = elem.get("def-start")?.parse().ok()?;
        let end = elem.get("def-end")?.parse().ok()?;
        Some((node, Range::new(start, end)))
    };
    let Some((node, range)) = target() else {
        log::trace!("entity at {offset} in {} has no target", snapshot.node);
        return None;
    };
    let valid = snapshot.version.source_text(&node).is_some_and(|text| {
        range.start <= range.end
            && range.end <= text.len()
            && text.is_char_boundary(range.start)
            && text.is_char_boundary(range.end)
    });
    if !valid {
        log::trace!("dangling hyperlink from {}:{offset} to {node} {range}", snapshot.node);
        return None;
    }
    Some((node, range))
}
