//! The editor side of a connection: mirrors the version history, sends
//! edits, and assembles markup from the back-end's reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::ToSocketAddrs;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::completion::{self, CompletionItem, Dictionary, SymbolAbbrevTable};
use crate::config::Config;
use crate::document::{
    Blob, DocumentError, History, NodeEdit, NodeName, Overlay, Perspective, Snapshot, TextEdit, Version, VersionId,
};
use crate::execution::{Assignment, ExecId, Kernel, TaskState};
use crate::markup::{self, names, MarkupElem, MarkupEntry, MarkupTree};
use crate::protocol::{self, encode, Endpoint, Message, MessageLog, OutputSeverity, TransportError};
use crate::range::Range;
use crate::sources::{parse_text, KeywordTable, TokenKind};

use super::HarnessError;

/// One output message of a task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputRecord {
    pub severity: OutputSeverity,
    pub body: String,
    pub sendback: Option<String>,
}

/// Imports named by the theory header at the start of `text`.
pub fn header_imports(text: &str, keywords: &KeywordTable) -> Vec<NodeName> {
    let spans = parse_text(text, keywords);
    let Some(span) = spans.iter().find(|s| !s.is_malformed()).filter(|s| s.name == "theory") else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut in_imports = false;
    for t in span.content().skip(1) {
        match t.source(text) {
            "imports" => in_imports = true,
            "begin" => break,
            s if in_imports && t.kind == TokenKind::Identifier => {
                if let Ok(n) = NodeName::theory(s) {
                    out.push(n);
                }
            }
            _ => {}
        }
    }
    out
}

fn apply_text_edit(text: &mut String, edit: &TextEdit) -> bool {
    match edit {
        TextEdit::Insert { offset, text: t } => {
            if *offset > text.len() || !text.is_char_boundary(*offset) {
                return false;
            }
            text.insert_str(*offset, t);
        }
        TextEdit::Remove { offset, len } => {
            let end = offset.saturating_add(*len);
            if end > text.len() || !text.is_char_boundary(*offset) || !text.is_char_boundary(end) {
                return false;
            }
            text.replace_range(*offset..end, "");
        }
    }
    true
}

pub struct Session {
    endpoint: Option<Endpoint>,
    backend: Option<JoinHandle<()>>,
    fs_reads: Option<Arc<AtomicUsize>>,
    history: History,
    perspectives: BTreeMap<NodeName, Perspective>,
    /// Updates and visibility changes not yet answered by an assignment.
    outstanding: usize,
    assigned: Option<VersionId>,
    assignment: Assignment,
    reports: HashMap<ExecId, (NodeName, Vec<MarkupEntry>)>,
    outputs: HashMap<ExecId, Vec<OutputRecord>>,
    states: HashMap<ExecId, TaskState>,
    hidden: BTreeSet<NodeName>,
    log: MessageLog,
    trace: Vec<String>,
    protocol_errors: Vec<String>,
    dictionary: Option<Dictionary>,
    symbols: SymbolAbbrevTable,
    frequency: HashMap<String, usize>,
    history_limit: usize,
    wait_timeout: Duration,
}

impl Session {
    /// Starts a back-end in this process and connects to it.
    pub fn in_process(config: &Config) -> Result<Session, HarnessError> {
        let registry = config.registry()?;
        let dictionary = config.load_dictionary()?;
        let (fe, be) = protocol::in_process();
        let Endpoint { mut sender, receiver } = be;
        let kernel = Kernel::spawn(
            config.kernel(),
            registry,
            Box::new(move |m| {
                if let Err(e) = sender.send(m) {
                    log::debug!("front-end gone: {e}");
                }
            }),
        );
        let fs_reads = kernel.fs_read_counter();
        let backend = thread::Builder::new()
            .name("pide-backend".into())
            .spawn(move || {
                let mut kernel = kernel;
                for m in receiver {
                    kernel.deliver(m);
                }
                kernel.stop();
            })
            .expect("spawn back-end");
        Session::start(fe, config, dictionary, Some(backend), Some(fs_reads))
    }

    /// Connects to a back-end listening on `addr`.
    pub fn connect(addr: impl ToSocketAddrs, config: &Config) -> Result<Session, HarnessError> {
        let dictionary = config.load_dictionary()?;
        let endpoint = protocol::connect(addr)?;
        Session::start(endpoint, config, dictionary, None, None)
    }

    fn start(
        endpoint: Endpoint,
        config: &Config,
        dictionary: Option<Dictionary>,
        backend: Option<JoinHandle<()>>,
        fs_reads: Option<Arc<AtomicUsize>>,
    ) -> Result<Session, HarnessError> {
        let mut s = Session {
            endpoint: Some(endpoint),
            backend,
            fs_reads,
            history: History::default(),
            perspectives: BTreeMap::new(),
            outstanding: 0,
            assigned: None,
            assignment: Assignment::default(),
            reports: HashMap::new(),
            outputs: HashMap::new(),
            states: HashMap::new(),
            hidden: BTreeSet::new(),
            log: MessageLog::default(),
            trace: Vec::new(),
            protocol_errors: Vec::new(),
            dictionary,
            symbols: SymbolAbbrevTable::default(),
            frequency: HashMap::new(),
            history_limit: config.history_limit,
            wait_timeout: Duration::from_millis(config.wait_timeout_ms),
        };
        if let Some(path) = &config.dictionary {
            s.send(Message::RegisterDictionary { path: path.display().to_string() })?;
        }
        Ok(s)
    }

    fn endpoint(&mut self) -> Result<&mut Endpoint, HarnessError> {
        self.endpoint.as_mut().ok_or(HarnessError::Transport(TransportError::Closed))
    }

    fn send(&mut self, msg: Message) -> Result<(), HarnessError> {
        let line = encode(&msg);
        self.endpoint()?.send(&msg)?;
        self.trace.push(format!("> {line}"));
        self.log.sent.push(line);
        Ok(())
    }

    // --- incoming ---

    fn handle(&mut self, msg: Result<Message, protocol::DecodeError>) {
        let msg = match msg {
            Ok(m) => m,
            Err(e) => {
                log::warn!("undecodable message: {e}");
                self.protocol_errors.push(e.0);
                return;
            }
        };
        let line = encode(&msg);
        self.trace.push(format!("< {line}"));
        self.log.received.push(line);
        match msg {
            Message::Assign { version, assignment } => {
                self.outstanding = self.outstanding.saturating_sub(1);
                let live: BTreeSet<ExecId> = assignment.ids().map(|(_, _, id)| id).collect();
                self.reports.retain(|id, _| live.contains(id));
                self.outputs.retain(|id, _| live.contains(id));
                self.states.retain(|id, _| live.contains(id));
                self.assigned = Some(version);
                self.assignment = assignment;
            }
            Message::Report { exec_id, node, entries } => {
                if !self.hidden.contains(&node) {
                    self.reports.insert(exec_id, (node, entries));
                }
            }
            Message::Output { exec_id, severity, body, sendback } => {
                self.outputs.entry(exec_id).or_default().push(OutputRecord { severity, body, sendback });
            }
            Message::TaskState { exec_id, state } => {
                self.states.insert(exec_id, state);
            }
            Message::ProtocolError { text } => {
                self.outstanding = self.outstanding.saturating_sub(1);
                log::warn!("back-end error: {text}");
                self.protocol_errors.push(text);
            }
            other => log::warn!("unexpected {} message from back-end", other.kind()),
        }
    }

    /// Handles every message that has already arrived.
    pub fn drain(&mut self) -> Result<(), HarnessError> {
        loop {
            match self.endpoint()?.recv_timeout(Duration::ZERO)? {
                Some(m) => self.handle(m),
                None => return Ok(()),
            }
        }
    }

    /// Handles messages until `done` holds; false on timeout.
    pub fn pump_until(
        &mut self,
        timeout: Duration,
        mut done: impl FnMut(&Session) -> bool,
    ) -> Result<bool, HarnessError> {
        let deadline = Instant::now() + timeout;
        loop {
            self.drain()?;
            if done(self) {
                return Ok(true);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(false);
            }
            if let Some(m) = self.endpoint()?.recv_timeout(left)? {
                self.handle(m);
            }
        }
    }

    /// No unanswered edits and no unfinished task on visible nodes.
    pub fn is_quiescent(&self) -> bool {
        self.outstanding == 0
            && self
                .assignment
                .ids()
                .filter(|(n, _, _)| !self.hidden.contains(*n))
                .all(|(_, _, id)| self.state(id).is_terminal())
    }

    /// Blocks until every sent edit has been answered with an assignment.
    pub fn sync(&mut self) -> Result<(), HarnessError> {
        let timeout = self.wait_timeout;
        if self.pump_until(timeout, |s| s.outstanding == 0)? {
            Ok(())
        } else {
            Err(HarnessError::Timeout(timeout))
        }
    }

    /// Blocks until quiescence.
    pub fn wait(&mut self) -> Result<(), HarnessError> {
        let timeout = self.wait_timeout;
        if self.pump_until(timeout, Session::is_quiescent)? {
            Ok(())
        } else {
            Err(HarnessError::Timeout(timeout))
        }
    }

    // --- edits ---

    /// Sends one edit batch. Text edits also update the theory header and
    /// shift visible ranges of the edited nodes.
    pub fn edit(&mut self, edits: Vec<(NodeName, NodeEdit)>) -> Result<VersionId, HarnessError> {
        let latest = self.history.latest().clone();
        let mut texts: BTreeMap<NodeName, String> = BTreeMap::new();
        let mut batch = Vec::new();
        for (node, edit) in edits {
            if let NodeEdit::Text { edit: te } = &edit {
                let text = texts
                    .entry(node.clone())
                    .or_insert_with(|| latest.nodes.get(&node).map_or_else(String::new, |n| n.text.to_string()));
                if !apply_text_edit(text, te) {
                    return Err(HarnessError::BadEdit(format!("edit out of bounds in {node}")));
                }
                if let Some(p) = self.perspectives.get_mut(&node) {
                    for r in &mut p.visible {
                        *r = Range::new(te.map_forward(r.start), te.map_forward(r.end));
                    }
                }
            }
            batch.push((node, edit));
        }
        for (node, text) in &texts {
            let imports = header_imports(text, self.history.keywords());
            let known = latest.nodes.get(node).map(|n| &n.header.imports);
            if known != Some(&imports) {
                let header = crate::document::NodeHeader { imports, errors: Vec::new() };
                batch.push((node.clone(), NodeEdit::Header { header }));
            }
            if let Some(p) = self.perspectives.get(node) {
                if !p.visible.is_empty() {
                    let perspective = p.clone().normalized(text.len());
                    batch.push((node.clone(), NodeEdit::Perspective { perspective }));
                }
            }
        }
        let version = self.history.update(latest.id, batch.clone())?;
        self.outstanding += 1;
        self.send(Message::Update { parent_version: latest.id, new_version: version.id, edits: batch })?;
        self.prune_history()?;
        Ok(version.id)
    }

    fn prune_history(&mut self) -> Result<(), HarnessError> {
        let keep_from = self.assigned.unwrap_or(VersionId(0));
        let old: Vec<VersionId> =
            self.history.excess(self.history_limit).into_iter().filter(|v| *v < keep_from).collect();
        if old.is_empty() {
            return Ok(());
        }
        let removed = self.history.remove(&old);
        self.send(Message::RemoveVersions { ids: removed })
    }

    pub fn open(&mut self, node: &NodeName) -> Result<VersionId, HarnessError> {
        self.edit(vec![(node.clone(), NodeEdit::insert(0, ""))])
    }

    pub fn insert(&mut self, node: &NodeName, offset: usize, text: &str) -> Result<VersionId, HarnessError> {
        self.edit(vec![(node.clone(), NodeEdit::insert(offset, text))])
    }

    pub fn remove(&mut self, node: &NodeName, offset: usize, len: usize) -> Result<VersionId, HarnessError> {
        self.edit(vec![(node.clone(), NodeEdit::remove(offset, len))])
    }

    fn send_perspective(&mut self, node: &NodeName) -> Result<VersionId, HarnessError> {
        let len = self.text(node).map_or(0, str::len);
        let perspective = self.perspectives.get(node).cloned().unwrap_or_default().normalized(len);
        self.edit(vec![(node.clone(), NodeEdit::Perspective { perspective })])
    }

    /// Replaces the visible ranges, keeping the overlays.
    pub fn set_perspective(&mut self, node: &NodeName, visible: Vec<Range>, full: bool) -> Result<VersionId, HarnessError> {
        let p = self.perspectives.entry(node.clone()).or_default();
        p.visible = visible;
        p.required_full = full;
        self.send_perspective(node)
    }

    pub fn add_overlay(&mut self, node: &NodeName, overlay: Overlay) -> Result<VersionId, HarnessError> {
        let p = self.perspectives.entry(node.clone()).or_default();
        if !p.overlays.contains(&overlay) {
            p.overlays.push(overlay);
        }
        self.send_perspective(node)
    }

    pub fn remove_overlay(&mut self, node: &NodeName, overlay: &Overlay) -> Result<VersionId, HarnessError> {
        let p = self.perspectives.entry(node.clone()).or_default();
        let before = p.overlays.len();
        p.overlays.retain(|o| o != overlay);
        if p.overlays.len() == before {
            return Err(HarnessError::BadEdit(format!("no such overlay on {node}")));
        }
        self.send_perspective(node)
    }

    /// Attaches editor-managed content for `path` to `node`.
    pub fn set_blob(&mut self, node: &NodeName, path: &str, content: &str) -> Result<VersionId, HarnessError> {
        let name = NodeName::new(path)?;
        self.edit(vec![(node.clone(), NodeEdit::Blob { name, blob: Some(Blob::new(content, true)) })])
    }

    pub fn set_visibility(&mut self, node: &NodeName, visible: bool) -> Result<(), HarnessError> {
        if visible {
            self.hidden.remove(node);
        } else {
            self.hidden.insert(node.clone());
            self.reports.retain(|_, (n, _)| n != node);
        }
        self.outstanding += 1;
        self.send(Message::SetVisibility { node: node.clone(), visible })
    }

    pub fn cancel(&mut self, id: ExecId) -> Result<(), HarnessError> {
        self.send(Message::Cancel { exec_id: id })
    }

    /// Inserts the first sendback text of the command's print outputs on a
    /// new line after the command.
    pub fn sendback(&mut self, node: &NodeName, command: usize) -> Result<String, HarnessError> {
        let version = self.assigned_version()?;
        let span = version
            .node(node)?
            .spans
            .get(command)
            .cloned()
            .ok_or_else(|| HarnessError::BadEdit(format!("no command {command} in {node}")))?;
        let ids = self.assignment.command(node, command).unwrap_or(&[]);
        let text = ids
            .iter()
            .skip(1)
            .flat_map(|id| self.outputs.get(id).into_iter().flatten())
            .find_map(|o| o.sendback.clone())
            .ok_or_else(|| HarnessError::BadEdit(format!("no sendback on command {command} of {node}")))?;
        let at = self.history.translate_offset(version.id, self.history.latest().id, node, span.content_range().end)?;
        self.insert(node, at, &format!("\n{text}"))?;
        Ok(text)
    }

    /// Applies a completion item to the latest text and records its use.
    pub fn accept_completion(&mut self, node: &NodeName, item: &CompletionItem) -> Result<VersionId, HarnessError> {
        let text = self.text(node).unwrap_or("");
        completion::apply_completion(text, item).map_err(|e| HarnessError::BadEdit(e.to_string()))?;
        *self.frequency.entry(item.replacement.clone()).or_default() += 1;
        let r = item.original;
        self.edit(vec![
            (node.clone(), NodeEdit::remove(r.start, r.len())),
            (node.clone(), NodeEdit::insert(r.start, item.replacement.clone())),
        ])
    }

    // --- queries ---

    pub fn latest(&self) -> &Arc<Version> {
        self.history.latest()
    }

    pub fn text(&self, node: &NodeName) -> Option<&str> {
        self.history.latest().nodes.get(node).map(|n| &*n.text)
    }

    pub fn assigned(&self) -> Option<VersionId> {
        self.assigned
    }

    fn assigned_version(&self) -> Result<Arc<Version>, HarnessError> {
        let v = self.assigned.ok_or_else(|| HarnessError::BadEdit("nothing assigned yet".into()))?;
        Ok(self.history.get(v)?.clone())
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn state(&self, id: ExecId) -> TaskState {
        self.states.get(&id).copied().unwrap_or(TaskState::Pending)
    }

    pub fn outputs(&self, id: ExecId) -> &[OutputRecord] {
        self.outputs.get(&id).map_or(&[], Vec::as_slice)
    }

    /// The highest print exec id currently assigned.
    pub fn last_print(&self) -> Option<ExecId> {
        self.assignment.nodes.values().flatten().flat_map(|ids| ids.iter().skip(1)).max().copied()
    }

    pub fn hidden(&self) -> &BTreeSet<NodeName> {
        &self.hidden
    }

    /// Markup entries held for `node` on the editor side.
    pub fn entry_count(&self, node: &NodeName) -> usize {
        self.reports.values().filter(|(n, _)| n == node).map(|(_, e)| e.len()).sum()
    }

    pub fn log(&self) -> &MessageLog {
        &self.log
    }

    /// Sent and received lines in arrival order, prefixed `> ` and `< `.
    pub fn trace(&self) -> String {
        self.trace.concat()
    }

    pub fn protocol_errors(&self) -> &[String] {
        &self.protocol_errors
    }

    /// Auxiliary files the back-end read from disk; only known in process.
    pub fn fs_reads(&self) -> Option<usize> {
        self.fs_reads.as_ref().map(|c| c.load(Ordering::SeqCst))
    }

    fn tree(&self, node: &NodeName, eval_only: bool) -> MarkupTree {
        let mut tree = MarkupTree::new();
        let Ok(version) = self.assigned_version() else { return tree };
        let (Ok(n), Some(commands)) = (version.node(node), self.assignment.nodes.get(node)) else {
            return tree;
        };
        for (span, ids) in n.spans.iter().zip(commands) {
            let take = if eval_only { 1 } else { ids.len() };
            for id in &ids[..take.min(ids.len())] {
                if let Some((_, entries)) = self.reports.get(id) {
                    for e in entries {
                        tree.insert(e.range.shift(span.range.start), e.elem.clone());
                    }
                }
            }
        }
        tree
    }

    /// Everything known for `node` at the assigned version, with spelling
    /// findings when a dictionary is configured.
    pub fn markup(&self, node: &NodeName) -> MarkupTree {
        let mut tree = self.tree(node, false);
        if let (Some(dict), Ok(version)) = (&self.dictionary, self.assigned_version()) {
            if let Some(text) = version.source_text(node) {
                let prose: Vec<Range> = tree.iter().into_iter().filter(|(_, e)| e.name == names::WORDS).map(|(r, _)| r).collect();
                for f in completion::spell_check(&prose, text, dict) {
                    tree.insert(f.range, MarkupElem::new(names::SPELL).with("suggestions", f.suggestions.join(",")));
                }
            }
        }
        tree
    }

    /// Markup from EVAL tasks only.
    pub fn eval_markup(&self, node: &NodeName) -> MarkupTree {
        self.tree(node, true)
    }

    pub fn snapshot(&self, node: &NodeName) -> Result<Snapshot, HarnessError> {
        let version = self.assigned_version()?;
        version.node(node)?;
        let stable = self.assignment.node_ids(node).all(|id| self.state(id).is_terminal());
        Ok(Snapshot { version, node: node.clone(), markup: self.markup(node), stable })
    }

    /// Flattened markup of one node, one `NODE START END NAME k=v` line per
    /// entry.
    pub fn dump(&self, node: &NodeName, eval_only: bool) -> String {
        let tree = if eval_only { self.eval_markup(node) } else { self.markup(node) };
        tree.flatten().iter().map(|(r, e)| format!("{node} {}\n", markup::dump_line(*r, e))).collect()
    }

    /// Dump of every node of the assigned version, in node order.
    pub fn dump_all(&self, eval_only: bool) -> String {
        let Ok(version) = self.assigned_version() else { return String::new() };
        version.nodes.keys().map(|n| self.dump(n, eval_only)).collect()
    }

    /// Merged completion list at `offset` of the assigned text, and whether
    /// the prover truncated its alternatives there.
    pub fn complete(&self, node: &NodeName, offset: usize) -> Result<(Vec<CompletionItem>, bool), HarnessError> {
        let version = self.assigned_version()?;
        let text = &version.node(node)?.text;
        if offset > text.len() {
            return Err(HarnessError::BadEdit(format!("offset {offset} beyond end of {node}")));
        }
        let tree = self.markup(node);
        let items = completion::complete(&tree, text, offset, self.history.keywords(), &self.symbols, &self.frequency);
        let truncated = tree.iter().into_iter().any(|(r, e)| {
            e.name == names::COMPLETION && r.start <= offset && offset <= r.end && e.get("truncated") == Some("true")
        });
        Ok((items, truncated))
    }

    pub fn hyperlink(&self, node: &NodeName, offset: usize) -> Result<Option<(NodeName, Range)>, HarnessError> {
        Ok(markup::resolve_hyperlink(&self.snapshot(node)?, offset))
    }

    pub fn close(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.endpoint.take();
        if let Some(t) = self.backend.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl From<DocumentError> for HarnessError {
    fn from(e: DocumentError) -> Self {
        HarnessError::BadEdit(e.to_string())
    }
}
