//! The versioned document model.
//!
//! A [`History`] holds immutable [`Version`]s connected by the edit batches
//! that produced them. Each version maps node names to nodes; a node is its
//! text, the command spans of that text, its import header, the editor
//! perspective and any auxiliary blobs. Unchanged nodes and unchanged spans
//! are shared between versions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::markup::MarkupTree;
use crate::range::Range;
use crate::sources::{parse_text, CommandSpan, KeywordTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocumentError {
    #[error("invalid node name {0:?}")]
    InvalidNodeName(String),
    #[error("no such version {0}")]
    UnknownVersion(VersionId),
    #[error("version {0} already exists")]
    VersionExists(VersionId),
    #[error("no such node {0}")]
    NoSuchNode(NodeName),
    #[error("no edit path")]
    NoEditPath,
}

/// Normalized logical path of a document node or blob.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeName(Arc<str>);

impl NodeName {
    pub fn new(path: &str) -> Result<Self, DocumentError> {
        let mut parts: Vec<&str> = Vec::new();
        for seg in path.split('/') {
            match seg {
                "" | "." => {}
                ".." => {
                    parts.pop();
                }
                s => parts.push(s),
            }
        }
        if parts.is_empty() {
            return Err(DocumentError::InvalidNodeName(path.to_string()));
        }
        Ok(NodeName(parts.join("/").into()))
    }

    /// Node name of a theory import: `A` refers to `A.thy`.
    pub fn theory(name: &str) -> Result<Self, DocumentError> {
        if name.contains('.') {
            NodeName::new(name)
        } else {
            NodeName::new(&format!("{name}.thy"))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NodeName {
    type Error = DocumentError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        NodeName::new(&s)
    }
}

impl From<NodeName> for String {
    fn from(n: NodeName) -> String {
        n.0.to_string()
    }
}

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VersionId(pub u64);

impl fmt::Display for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeHeader {
    pub imports: Vec<NodeName>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Overlay {
    pub command: usize,
    pub function: String,
    pub args: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Perspective {
    pub visible: Vec<Range>,
    #[serde(default)]
    pub overlays: Vec<Overlay>,
    #[serde(default)]
    pub required_full: bool,
}

impl Perspective {
    pub fn full() -> Self {
        Perspective { required_full: true, ..Default::default() }
    }

    pub fn ranges<I: IntoIterator<Item = Range>>(ranges: I) -> Self {
        Perspective { visible: ranges.into_iter().collect(), ..Default::default() }
    }

    /// Sorts, merges and clamps the visible ranges to `[0, len]`.
    pub fn normalized(mut self, len: usize) -> Self {
        let mut ranges: Vec<Range> = self
            .visible
            .iter()
            .map(|r| Range::new(r.start.min(len), r.end.min(len)))
            .filter(|r| !r.is_empty())
            .collect();
        ranges.sort();
        let mut merged: Vec<Range> = Vec::with_capacity(ranges.len());
        for r in ranges {
            match merged.last_mut() {
                Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
                _ => merged.push(r),
            }
        }
        self.visible = merged;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty() && self.overlays.is_empty() && !self.required_full
    }

    /// Whether any visible range intersects `range`.
    pub fn covers(&self, range: Range) -> bool {
        self.required_full
            || self
                .visible
                .iter()
                .any(|v| v.overlaps(range) || (range.is_empty() && v.touches(range.start)))
    }
}

/// Auxiliary file content shipped by digest.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Blob {
    pub digest: String,
    pub content: String,
    pub editor_managed: bool,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

impl Blob {
    pub fn new(content: impl Into<String>, editor_managed: bool) -> Self {
        let content = content.into();
        Blob { digest: sha256_hex(content.as_bytes()), content, editor_managed }
    }

    pub fn is_consistent(&self) -> bool {
        self.digest == sha256_hex(self.content.as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TextEdit {
    Insert { offset: usize, text: String },
    Remove { offset: usize, len: usize },
}

impl TextEdit {
    /// Maps an offset through this edit. An offset names the character at
    /// that position: insertions at or before it shift it, removals that
    /// cover it clamp it to the removal start.
    pub fn map_forward(&self, x: usize) -> usize {
        match *self {
            TextEdit::Insert { offset, ref text } => {
                if offset <= x {
                    x + text.len()
                } else {
                    x
                }
            }
            TextEdit::Remove { offset, len } => {
                if x < offset {
                    x
                } else if x >= offset + len {
                    x - len
                } else {
                    offset
                }
            }
        }
    }

    /// Maps an offset of the edited text back to the text before the edit.
    pub fn map_backward(&self, x: usize) -> usize {
        match *self {
            TextEdit::Insert { offset, ref text } => {
                if x < offset {
                    x
                } else if x >= offset + text.len() {
                    x - text.len()
                } else {
                    offset
                }
            }
            TextEdit::Remove { offset, len } => {
                if x >= offset {
                    x + len
                } else {
                    x
                }
            }
        }
    }

    fn apply(&self, text: &mut String) -> Result<(), String> {
        match *self {
            TextEdit::Insert { offset, text: ref ins } => {
                if offset > text.len() || !text.is_char_boundary(offset) {
                    return Err(format!(
                        "insert at offset {offset} out of bounds (length {})",
                        text.len()
                    ));
                }
                text.insert_str(offset, ins);
            }
            TextEdit::Remove { offset, len } => {
                let end = offset.checked_add(len).filter(|&e| e <= text.len());
                match end {
                    Some(end) if text.is_char_boundary(offset) && text.is_char_boundary(end) => {
                        text.replace_range(offset..end, "");
                    }
                    _ => {
                        return Err(format!(
                            "remove of {len} at offset {offset} out of bounds (length {})",
                            text.len()
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeEdit {
    Text { edit: TextEdit },
    Header { header: NodeHeader },
    Perspective { perspective: Perspective },
    Blob { name: NodeName, blob: Option<Blob> },
}

impl NodeEdit {
    pub fn insert(offset: usize, text: impl Into<String>) -> Self {
        NodeEdit::Text { edit: TextEdit::Insert { offset, text: text.into() } }
    }

    pub fn remove(offset: usize, len: usize) -> Self {
        NodeEdit::Text { edit: TextEdit::Remove { offset, len } }
    }
}

/// A rejected edit, positioned at the offset it named.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EditError {
    pub offset: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Node {
    pub text: Arc<str>,
    pub spans: Vec<Arc<CommandSpan>>,
    pub header: NodeHeader,
    pub perspective: Perspective,
    pub blobs: BTreeMap<NodeName, Arc<Blob>>,
    /// Edits of the producing batch that were rejected.
    pub edit_errors: Vec<EditError>,
}

impl Node {
    /// Byte offset where command `index` starts.
    pub fn command_range(&self, index: usize) -> Option<Range> {
        self.spans.get(index).map(|s| s.range)
    }

    /// Index of the command whose range contains `offset` (end-inclusive
    /// only for the last command).
    pub fn command_at(&self, offset: usize) -> Option<usize> {
        let n = self.spans.len();
        self.spans
            .iter()
            .position(|s| s.range.start <= offset && offset < s.range.end)
            .or_else(|| (n > 0 && offset == self.text.len()).then(|| n - 1))
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct Version {
    pub id: VersionId,
    pub parent: Option<VersionId>,
    pub nodes: BTreeMap<NodeName, Arc<Node>>,
    /// The edits this version was produced by; rejected edits are omitted.
    pub edits: Vec<(NodeName, NodeEdit)>,
}

impl Version {
    pub fn node(&self, name: &NodeName) -> Result<&Arc<Node>, DocumentError> {
        self.nodes.get(name).ok_or_else(|| DocumentError::NoSuchNode(name.clone()))
    }

    /// Imports usable for checking: declared, existing, and not part of a cycle.
    pub fn effective_imports(&self, name: &NodeName) -> Vec<NodeName> {
        match self.nodes.get(name) {
            Some(node) if node.header.errors.iter().all(|e| !e.starts_with("cyclic")) => node
                .header
                .imports
                .iter()
                .filter(|i| self.nodes.contains_key(*i))
                .cloned()
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Nodes ordered so that every node comes after its effective imports.
    pub fn topological_order(&self) -> Vec<NodeName> {
        fn visit(
            v: &Version,
            n: &NodeName,
            done: &mut BTreeSet<NodeName>,
            out: &mut Vec<NodeName>,
        ) {
            if !done.insert(n.clone()) {
                return;
            }
            for i in v.effective_imports(n) {
                visit(v, &i, done, out);
            }
            out.push(n.clone());
        }
        let mut done = BTreeSet::new();
        let mut out = Vec::new();
        for n in self.nodes.keys() {
            visit(self, n, &mut done, &mut out);
        }
        out
    }

    /// Looks up the content of a node or of a blob attached to any node.
    pub fn source_text(&self, name: &NodeName) -> Option<&str> {
        if let Some(node) = self.nodes.get(name) {
            return Some(&node.text);
        }
        self.nodes.values().find_map(|n| n.blobs.get(name)).map(|b| b.content.as_str())
    }

    /// Digest of the full content, for immutability checks.
    pub fn structural_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.id.0.to_le_bytes());
        for (name, node) in &self.nodes {
            h.update(name.as_str().as_bytes());
            h.update([0]);
            h.update(node.text.as_bytes());
            h.update([0]);
            h.update(format!("{:?}{:?}{:?}", node.header, node.perspective, node.spans).as_bytes());
            for (b, blob) in &node.blobs {
                h.update(b.as_str().as_bytes());
                h.update(blob.digest.as_bytes());
            }
        }
        h.update(format!("{:?}", self.edits).as_bytes());
        hex::encode(h.finalize())
    }
}

/// Recomputes header diagnostics: missing imports and import cycles.
fn check_headers(nodes: &mut BTreeMap<NodeName, Arc<Node>>) {
    let names: Vec<NodeName> = nodes.keys().cloned().collect();
    let edges: HashMap<&NodeName, Vec<&NodeName>> = names
        .iter()
        .map(|n| {
            let node = &nodes[n];
            (n, node.header.imports.iter().filter(|i| nodes.contains_key(*i)).collect())
        })
        .collect();
    // A node is cyclic when it can reach itself.
    let mut cyclic = BTreeSet::new();
    for start in &names {
        let mut stack: Vec<&NodeName> = edges[start].clone();
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == start {
                cyclic.insert(start.clone());
                break;
            }
            if seen.insert(n) {
                stack.extend(edges[n].iter().copied());
            }
        }
    }
    let mut updates = Vec::new();
    for name in &names {
        let node = &nodes[name];
        let mut errors: Vec<String> = node
            .header
            .imports
            .iter()
            .filter(|i| !nodes.contains_key(*i))
            .map(|i| format!("missing import {i}"))
            .collect();
        if cyclic.contains(name) {
            errors.insert(0, format!("cyclic import involving {name}"));
        }
        if errors != node.header.errors {
            updates.push((name.clone(), errors));
        }
    }
    for (name, errors) in updates {
        let node = Arc::make_mut(nodes.get_mut(&name).expect("present"));
        node.header.errors = errors;
    }
}

/// The version history. All mutation goes through [`History::update`].
#[derive(Debug)]
pub struct History {
    versions: BTreeMap<VersionId, Arc<Version>>,
    table: KeywordTable,
}

impl Default for History {
    fn default() -> Self {
        History::new(KeywordTable::default())
    }
}

impl History {
    pub fn new(table: KeywordTable) -> Self {
        let root = Version {
            id: VersionId(0),
            parent: None,
            nodes: BTreeMap::new(),
            edits: Vec::new(),
        };
        History { versions: BTreeMap::from([(root.id, Arc::new(root))]), table }
    }

    pub fn keywords(&self) -> &KeywordTable {
        &self.table
    }

    pub fn get(&self, id: VersionId) -> Result<&Arc<Version>, DocumentError> {
        self.versions.get(&id).ok_or(DocumentError::UnknownVersion(id))
    }

    pub fn latest(&self) -> &Arc<Version> {
        self.versions.values().next_back().expect("history is never empty")
    }

    pub fn ids(&self) -> impl Iterator<Item = VersionId> + '_ {
        self.versions.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.versions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
    }

    /// Applies an edit batch to `parent`, producing the next version.
    pub fn update(
        &mut self,
        parent: VersionId,
        edits: Vec<(NodeName, NodeEdit)>,
    ) -> Result<Arc<Version>, DocumentError> {
        let id = VersionId(self.latest().id.0 + 1);
        self.update_as(parent, id, edits)
    }

    /// Like [`update`](Self::update) with an explicit new id, as assigned by
    /// the other side of the protocol.
    pub fn update_as(
        &mut self,
        parent: VersionId,
        id: VersionId,
        edits: Vec<(NodeName, NodeEdit)>,
    ) -> Result<Arc<Version>, DocumentError> {
        if id <= self.latest().id {
            return Err(DocumentError::VersionExists(id));
        }
        let base = self.get(parent)?.clone();
        let mut nodes = base.nodes.clone();
        let mut touched: BTreeSet<NodeName> = BTreeSet::new();
        let mut text_changed: BTreeSet<NodeName> = BTreeSet::new();
        let mut headers_changed = false;
        let mut applied = Vec::new();
        let mut texts: HashMap<NodeName, String> = HashMap::new();

        for (name, edit) in edits {
            let entry = nodes.entry(name.clone()).or_insert_with(|| {
                headers_changed = true;
                Arc::new(Node::default())
            });
            if touched.insert(name.clone()) {
                Arc::make_mut(entry).edit_errors.clear();
            }
            match &edit {
                NodeEdit::Text { edit: text_edit } => {
                    let text = texts.entry(name.clone()).or_insert_with(|| entry.text.to_string());
                    if let Err(message) = text_edit.apply(text) {
                        let offset = match text_edit {
                            TextEdit::Insert { offset, .. } | TextEdit::Remove { offset, .. } => {
                                *offset
                            }
                        };
                        log::debug!("{name}: {message}");
                        Arc::make_mut(entry).edit_errors.push(EditError { offset, message });
                        continue;
                    }
                    text_changed.insert(name.clone());
                }
                NodeEdit::Header { header } => {
                    Arc::make_mut(entry).header =
                        NodeHeader { imports: header.imports.clone(), errors: Vec::new() };
                    headers_changed = true;
                }
                NodeEdit::Perspective { perspective } => {
                    // normalized after text edits, against the final length
                    Arc::make_mut(entry).perspective = perspective.clone();
                }
                NodeEdit::Blob { name: blob_name, blob } => {
                    let node = Arc::make_mut(entry);
                    match blob {
                        Some(b) => {
                            node.blobs.insert(blob_name.clone(), Arc::new(b.clone()));
                        }
                        None => {
                            node.blobs.remove(blob_name);
                        }
                    }
                }
            }
            applied.push((name, edit));
        }

        for (name, text) in texts {
            if !text_changed.contains(&name) {
                continue;
            }
            let node = Arc::make_mut(nodes.get_mut(&name).expect("edited node exists"));
            let old_spans = std::mem::take(&mut node.spans);
            let mut spans = parse_text(&text, &self.table);
            for (i, span) in spans.iter_mut().enumerate() {
                if let Some(old) = old_spans.get(i) {
                    if **old == **span {
                        *span = old.clone();
                    }
                }
            }
            node.spans = spans;
            node.text = text.into();
        }
        for name in &touched {
            let node = nodes.get_mut(name).expect("touched node exists");
            let len = node.text.len();
            let normalized = node.perspective.clone().normalized(len);
            if normalized != node.perspective {
                Arc::make_mut(node).perspective = normalized;
            }
        }
        if headers_changed {
            check_headers(&mut nodes);
        }

        let version = Arc::new(Version { id, parent: Some(parent), nodes, edits: applied });
        self.versions.insert(id, version.clone());
        Ok(version)
    }

    /// Ancestor chain of `id`, starting with `id` itself. Stops at a pruned
    /// version.
    fn ancestors(&self, id: VersionId) -> Vec<VersionId> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(v) = cur.and_then(|c| self.versions.get(&c)) {
            out.push(v.id);
            cur = v.parent;
        }
        out
    }

    /// Maps an offset in `node` from one version to another along the edit
    /// path connecting them.
    pub fn translate_offset(
        &self,
        from: VersionId,
        to: VersionId,
        node: &NodeName,
        offset: usize,
    ) -> Result<usize, DocumentError> {
        self.get(from).map_err(|_| DocumentError::NoEditPath)?;
        self.get(to).map_err(|_| DocumentError::NoEditPath)?;
        let up = self.ancestors(from);
        let down = self.ancestors(to);
        let common = up
            .iter()
            .find(|v| down.contains(v))
            .copied()
            .ok_or(DocumentError::NoEditPath)?;
        let text_edits = |v: VersionId| -> Vec<TextEdit> {
            self.versions[&v]
                .edits
                .iter()
                .filter(|(n, _)| n == node)
                .filter_map(|(_, e)| match e {
                    NodeEdit::Text { edit } => Some(edit.clone()),
                    _ => None,
                })
                .collect()
        };
        let mut x = offset;
        for &v in up.iter().take_while(|&&v| v != common) {
            for e in text_edits(v).iter().rev() {
                x = e.map_backward(x);
            }
        }
        let forward: Vec<VersionId> = down.iter().take_while(|&&v| v != common).copied().collect();
        for &v in forward.iter().rev() {
            for e in text_edits(v) {
                x = e.map_forward(x);
            }
        }
        Ok(x)
    }

    /// Removes the given versions; the latest version is always retained.
    pub fn remove(&mut self, ids: &[VersionId]) -> Vec<VersionId> {
        let latest = self.latest().id;
        ids.iter()
            .filter(|&&id| id != latest)
            .filter(|id| self.versions.remove(id).is_some())
            .copied()
            .collect()
    }

    /// Versions beyond the most recent `limit`, oldest first.
    pub fn excess(&self, limit: usize) -> Vec<VersionId> {
        let n = self.versions.len();
        self.versions.keys().take(n.saturating_sub(limit.max(1))).copied().collect()
    }
}

/// Display state of one node at one version.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub version: Arc<Version>,
    pub node: NodeName,
    pub markup: MarkupTree,
    /// True when no unfinished task affects the node.
    pub stable: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> NodeName {
        NodeName::new(s).unwrap()
    }

    fn with_text(h: &mut History, name: &str, text: &str) -> Arc<Version> {
        let latest = h.latest().id;
        h.update(latest, vec![(n(name), NodeEdit::insert(0, text))]).unwrap()
    }

    #[test]
    fn node_names_normalize() {
        assert_eq!(n("./lib/../a.defs").as_str(), "a.defs");
        assert_eq!(n("lib//x/./y").as_str(), "lib/x/y");
        assert!(NodeName::new("").is_err());
        assert!(NodeName::new("a/..").is_err());
        assert_eq!(NodeName::theory("A").unwrap().as_str(), "A.thy");
    }

    #[test]
    fn update_appends_text() {
        let mut h = History::default();
        let v1 = with_text(&mut h, "S.thy", "eval 1");
        let v2 = h.update(v1.id, vec![(n("S.thy"), NodeEdit::insert(6, " + 2"))]).unwrap();
        let node = v2.node(&n("S.thy")).unwrap();
        assert_eq!(&*node.text, "eval 1 + 2");
        assert_eq!(node.spans.len(), 1);
        assert!(v2.id > v1.id);
    }

    #[test]
    fn empty_batch_is_identity() {
        let mut h = History::default();
        let v1 = with_text(&mut h, "S.thy", "eval 1 eval 2");
        let v2 = h.update(v1.id, vec![]).unwrap();
        assert_ne!(v1.id, v2.id);
        assert_eq!(v1.nodes, v2.nodes);
        assert!(Arc::ptr_eq(&v1.nodes[&n("S.thy")], &v2.nodes[&n("S.thy")]));
    }

    #[test]
    fn edit_shares_prefix_spans() {
        let mut h = History::default();
        let v1 = with_text(&mut h, "S.thy", "eval 0 def x = 1 eval x");
        let before = v1.structural_hash();
        let v2 = h.update(v1.id, vec![(n("S.thy"), NodeEdit::insert(12, "y"))]).unwrap();
        assert_eq!(v1.structural_hash(), before);
        let (a, b) = (&v1.nodes[&n("S.thy")], &v2.nodes[&n("S.thy")]);
        assert_eq!(&*b.text, "eval 0 def xy = 1 eval x");
        assert!(Arc::ptr_eq(&a.spans[0], &b.spans[0]));
        assert_ne!(a.spans[1], b.spans[1]);
        assert_eq!(a.spans[2].shifted(1), *b.spans[2]);
    }

    #[test]
    fn spec_def_insert_example() {
        let mut h = History::default();
        let v1 = with_text(&mut h, "S.thy", "def x = 1 eval x");
        let v2 = h.update(v1.id, vec![(n("S.thy"), NodeEdit::insert(5, "y"))]).unwrap();
        let (a, b) = (&v1.nodes[&n("S.thy")], &v2.nodes[&n("S.thy")]);
        assert_eq!(&*b.text, "def xy = 1 eval x");
        assert_ne!(a.spans[0], b.spans[0]);
        assert_eq!(a.spans[1].shifted(1), *b.spans[1]);
    }

    #[test]
    fn out_of_bounds_edit_is_recorded_and_rest_applies() {
        let mut h = History::default();
        let v1 = with_text(&mut h, "S.thy", "eval 1");
        let v2 = h
            .update(
                v1.id,
                vec![
                    (n("S.thy"), NodeEdit::insert(99, "x")),
                    (n("S.thy"), NodeEdit::insert(0, "  ")),
                    (n("S.thy"), NodeEdit::remove(5, 10)),
                ],
            )
            .unwrap();
        let node = &v2.nodes[&n("S.thy")];
        assert_eq!(&*node.text, "  eval 1");
        assert_eq!(node.edit_errors.len(), 2);
        assert_eq!(node.edit_errors[0].offset, 99);
        assert_eq!(v2.edits.len(), 1);
    }

    #[test]
    fn unknown_parent_is_rejected() {
        let mut h = History::default();
        assert_eq!(h.update(VersionId(7), vec![]).unwrap_err(), DocumentError::UnknownVersion(VersionId(7)));
    }

    #[test]
    fn translate_examples() {
        let mut h = History::default();
        let s = n("S.thy");
        let v1 = with_text(&mut h, "S.thy", "0123456789abcdef");
        let v2 = h.update(v1.id, vec![(s.clone(), NodeEdit::insert(5, "abc"))]).unwrap();
        assert_eq!(h.translate_offset(v1.id, v2.id, &s, 10).unwrap(), 13);
        let v3 = h.update(v1.id, vec![(s.clone(), NodeEdit::remove(4, 3))]).unwrap();
        assert_eq!(h.translate_offset(v1.id, v3.id, &s, 5).unwrap(), 4);
        let v4 = h
            .update(v1.id, vec![(s.clone(), NodeEdit::insert(0, "ab")), (s.clone(), NodeEdit::remove(1, 1))])
            .unwrap();
        assert_eq!(h.translate_offset(v1.id, v4.id, &s, 3).unwrap(), 4);
        // siblings connect through their common parent
        assert_eq!(h.translate_offset(v2.id, v3.id, &s, 13).unwrap(), 7);
        h.remove(&[v1.id]);
        assert_eq!(h.translate_offset(v2.id, v3.id, &s, 13), Err(DocumentError::NoEditPath));
    }

    /// Oracle: track a marker character through real string edits.
    fn marker_oracle(text: &str, edits: &[TextEdit], offset: usize) -> usize {
        let mut chars: Vec<(char, bool)> = text.chars().map(|c| (c, false)).collect();
        chars.push(('$', false));
        chars[offset].1 = true;
        for e in edits {
            match e {
                TextEdit::Insert { offset, text } => {
                    for (k, c) in text.chars().enumerate() {
                        chars.insert(offset + k, (c, false));
                    }
                }
                TextEdit::Remove { offset, len } => {
                    let removed: Vec<_> = chars.drain(*offset..offset + len).collect();
                    if removed.iter().any(|(_, m)| *m) {
                        chars[*offset].1 = true;
                    }
                }
            }
        }
        chars.iter().position(|(_, m)| *m).unwrap()
    }

    proptest::proptest! {
        #[test]
        fn translate_matches_marker_oracle(
            ops in proptest::collection::vec((0usize..40, 0usize..4, proptest::bool::ANY), 1..6),
            x in 0usize..40,
        ) {
            let s = n("S.thy");
            let text = "abcdefghijklmnopqrstuvwxyz0123456789";
            let mut h = History::default();
            let v1 = with_text(&mut h, "S.thy", text);
            let mut len = text.len();
            let mut edits = Vec::new();
            for (o, l, ins) in ops {
                let o = o % (len + 1);
                let e = if ins || len == o {
                    TextEdit::Insert { offset: o, text: "XY"[..l.min(2).max(1)].to_string() }
                } else {
                    TextEdit::Remove { offset: o, len: (l + 1).min(len - o) }
                };
                len = match &e { TextEdit::Insert { text, .. } => len + text.len(), TextEdit::Remove { len: r, .. } => len - r };
                edits.push(e);
            }
            let x = x % (text.len() + 1);
            let mut cur = v1.id;
            for e in &edits {
                cur = h.update(cur, vec![(s.clone(), NodeEdit::Text { edit: e.clone() })]).unwrap().id;
            }
            proptest::prop_assert_eq!(h.translate_offset(v1.id, cur, &s, x).unwrap(), marker_oracle(text, &edits, x));
        }
    }

    #[test]
    fn cyclic_headers_are_marked() {
        let mut h = History::default();
        let hdr = |imports: &[&str]| NodeEdit::Header {
            header: NodeHeader { imports: imports.iter().map(|i| n(i)).collect(), errors: vec![] },
        };
        let v = h
            .update(
                VersionId(0),
                vec![
                    (n("A.thy"), hdr(&["B.thy"])),
                    (n("B.thy"), hdr(&["A.thy"])),
                    (n("C.thy"), hdr(&["A.thy", "Z.thy"])),
                ],
            )
            .unwrap();
        assert!(v.nodes[&n("A.thy")].header.errors[0].starts_with("cyclic"));
        assert!(v.nodes[&n("B.thy")].header.errors[0].starts_with("cyclic"));
        assert_eq!(v.nodes[&n("C.thy")].header.errors, vec!["missing import Z.thy"]);
        assert!(v.effective_imports(&n("A.thy")).is_empty());
        assert_eq!(v.effective_imports(&n("C.thy")), vec![n("A.thy")]);
        let order = v.topological_order();
        let pos = |x: &str| order.iter().position(|o| o.as_str() == x).unwrap();
        assert!(pos("A.thy") < pos("C.thy"));
        // breaking the cycle clears the errors
        let v2 = h.update(v.id, vec![(n("B.thy"), hdr(&[]))]).unwrap();
        assert!(v2.nodes[&n("A.thy")].header.errors.is_empty());
    }

    #[test]
    fn perspective_normalizes_against_new_text() {
        let mut h = History::default();
        let v = h
            .update(
                VersionId(0),
                vec![
                    (n("S.thy"), NodeEdit::Perspective {
                        perspective: Perspective::ranges([Range::new(4, 8), Range::new(0, 5), Range::new(9, 99)]),
                    }),
                    (n("S.thy"), NodeEdit::insert(0, "eval 1 eval 2")),
                ],
            )
            .unwrap();
        assert_eq!(v.nodes[&n("S.thy")].perspective.visible, vec![Range::new(0, 8), Range::new(9, 13)]);
    }

    #[test]
    fn blob_digest_and_pruning() {
        let b = Blob::new("def a = 1", true);
        assert!(b.is_consistent());
        assert_eq!(b.digest.len(), 64);
        let mut h = History::default();
        for i in 0..5 {
            with_text(&mut h, "S.thy", &format!("eval {i} "));
        }
        let excess = h.excess(2);
        assert_eq!(excess.len(), 4);
        h.remove(&excess);
        assert_eq!(h.len(), 2);
    }
}
