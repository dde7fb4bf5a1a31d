//! The back-end coordinator: applies document updates, maintains the task
//! graph for the latest version and talks to the front-end.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::pool::{Job, Pool, Rank};
use super::{
    Assignment, ExecId, Interrupt, PrintBody, PrintInput, PrintMessage, Registry, TaskControl, TaskState,
};
use crate::document::{Blob, History, Node, NodeName, Version, VersionId};
use crate::markup::{names, MarkupElem, MarkupEntry};
use crate::prover::{load_path, CheckContext, CheckOutcome, Prover, Severity, DEFAULT_ALTERNATIVES_LIMIT};
use crate::protocol::{DecodeError, Endpoint, Message, OutputSeverity};
use crate::range::Range;
use crate::sources::CommandSpan;

#[derive(Clone, Debug)]
pub struct KernelConfig {
    pub workers: usize,
    pub alternatives_limit: usize,
    /// Where `load` looks for files without an editor-managed blob. The
    /// working directory when unset.
    pub blob_dir: Option<PathBuf>,
    /// Randomizes the order of equally ranked jobs.
    pub seed: Option<u64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            workers: thread::available_parallelism().map_or(1, |n| n.get()),
            alternatives_limit: DEFAULT_ALTERNATIVES_LIMIT,
            blob_dir: None,
            seed: None,
        }
    }
}

enum Event {
    Incoming(Result<Message, DecodeError>),
    Started(ExecId),
    Finished(ExecId, JobOutput),
    Shutdown,
}

enum JobOutput {
    Eval(Arc<CheckOutcome>),
    Print(Result<Vec<PrintMessage>, Interrupt>),
}

/// Where the incoming context of an EVAL comes from.
#[derive(Clone, Debug)]
enum Source {
    After(ExecId),
    Entry(Arc<Entry>),
}

#[derive(Debug)]
struct Entry {
    node: NodeName,
    header_errors: Vec<String>,
    imports: Vec<Source>,
}

impl Source {
    fn deps(&self, out: &mut Vec<ExecId>) {
        match self {
            Source::After(id) => out.push(*id),
            Source::Entry(e) => e.imports.iter().for_each(|s| s.deps(out)),
        }
    }
}

enum Work {
    Eval {
        key: String,
        source: Source,
        blobs: Arc<HashMap<String, Arc<Blob>>>,
        outcome: Option<Arc<CheckOutcome>>,
    },
    Print {
        eval: ExecId,
        function: String,
        args: Vec<String>,
        priority: i32,
        not_before: Instant,
        timeout_ms: u64,
        body: Option<PrintBody>,
    },
}

struct Task {
    node: NodeName,
    span: Arc<CommandSpan>,
    text: Arc<str>,
    work: Work,
    state: TaskState,
    control: Option<Arc<TaskControl>>,
    /// No longer assigned; kept only until its running body returns.
    dropped: bool,
}

struct Retained {
    node: NodeName,
    /// Serialized report entries.
    data: String,
    digest: String,
}

/// Handle to a running back-end. Dropping it stops the coordinator.
pub struct Kernel {
    events: Sender<Event>,
    thread: Option<JoinHandle<()>>,
    fs_reads: Arc<AtomicUsize>,
}

impl Kernel {
    /// Starts a coordinator that writes its messages to `sink`.
    pub fn spawn(config: KernelConfig, registry: Registry, sink: Box<dyn FnMut(&Message) + Send>) -> Kernel {
        let (tx, rx) = mpsc::channel();
        let fs_reads = Arc::new(AtomicUsize::new(0));
        let coordinator = Coordinator {
            history: History::default(),
            registry: Arc::new(registry),
            prover: Arc::new(Prover::new(config.alternatives_limit)),
            pool: Pool::new(config.workers),
            events: tx.clone(),
            sink,
            next_exec: 0,
            tasks: HashMap::new(),
            waiting: HashMap::new(),
            assignment: Assignment::default(),
            assigned: None,
            hidden: BTreeSet::new(),
            retained: HashMap::new(),
            fs_reads: fs_reads.clone(),
            blob_dir: config.blob_dir.clone(),
            seed: config.seed,
        };
        let thread = thread::Builder::new()
            .name("pide-coordinator".into())
            .spawn(move || coordinator.run(rx))
            .expect("spawn coordinator");
        Kernel { events: tx, thread: Some(thread), fs_reads }
    }

    /// Serves one front-end connection until it closes.
    pub fn serve(config: KernelConfig, registry: Registry, endpoint: Endpoint) {
        let Endpoint { mut sender, receiver } = endpoint;
        let mut kernel = Kernel::spawn(
            config,
            registry,
            Box::new(move |m| {
                if let Err(e) = sender.send(m) {
                    log::debug!("dropping outgoing message: {e}");
                }
            }),
        );
        for m in receiver {
            kernel.deliver(m);
        }
        kernel.stop();
    }

    pub fn send(&self, msg: Message) {
        self.deliver(Ok(msg));
    }

    pub fn deliver(&self, msg: Result<Message, DecodeError>) {
        let _ = self.events.send(Event::Incoming(msg));
    }

    /// Number of auxiliary files read from the file system so far.
    pub fn fs_reads(&self) -> usize {
        self.fs_reads.load(Ordering::SeqCst)
    }

    /// Shared handle to the counter behind [`fs_reads`](Self::fs_reads).
    pub fn fs_read_counter(&self) -> Arc<AtomicUsize> {
        self.fs_reads.clone()
    }

    pub fn stop(&mut self) {
        let _ = self.events.send(Event::Shutdown);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Kernel {
    fn drop(&mut self) {
        self.stop();
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn hash_parts(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

struct Coordinator {
    history: History,
    registry: Arc<Registry>,
    prover: Arc<Prover>,
    pool: Pool,
    events: Sender<Event>,
    sink: Box<dyn FnMut(&Message) + Send>,
    next_exec: u64,
    tasks: HashMap<ExecId, Task>,
    /// Tasks blocked on the key task.
    waiting: HashMap<ExecId, Vec<ExecId>>,
    assignment: Assignment,
    assigned: Option<VersionId>,
    hidden: BTreeSet<NodeName>,
    retained: HashMap<ExecId, Retained>,
    fs_reads: Arc<AtomicUsize>,
    blob_dir: Option<PathBuf>,
    seed: Option<u64>,
}

impl Coordinator {
    fn run(mut self, rx: Receiver<Event>) {
        for event in rx {
            match event {
                Event::Incoming(Ok(msg)) => self.handle(msg),
                Event::Incoming(Err(e)) => self.emit(Message::from(e)),
                Event::Started(id) => self.started(id),
                Event::Finished(id, out) => self.finished(id, out),
                Event::Shutdown => break,
            }
        }
        for t in self.tasks.values() {
            if let Some(c) = &t.control {
                c.cancel();
            }
        }
    }

    fn emit(&mut self, msg: Message) {
        (self.sink)(&msg);
    }

    fn handle(&mut self, msg: Message) {
        match msg {
            Message::Update { parent_version, new_version, edits } => {
                match self.history.update_as(parent_version, new_version, edits) {
                    Ok(v) => self.schedule(v),
                    Err(e) => self.emit(Message::error(format!("update rejected: {e}"))),
                }
            }
            Message::Cancel { exec_id } => self.cancel(exec_id),
            Message::RemoveVersions { ids } => {
                let removed = self.history.remove(&ids);
                log::debug!("removed versions {removed:?}");
            }
            Message::SetVisibility { node, visible } => self.set_visibility(node, visible),
            Message::RegisterDictionary { path } => {
                if let Err(e) = std::fs::read_to_string(&path) {
                    self.emit(Message::error(format!("cannot read dictionary {path}: {e}")));
                }
            }
            Message::Hello { .. } => {}
            other => self.emit(Message::error(format!("unexpected {} message", other.kind()))),
        }
    }

    fn fresh_id(&mut self) -> ExecId {
        self.next_exec += 1;
        ExecId(self.next_exec)
    }

    /// Blobs a `load` command refers to: the node's editor-managed blob, or
    /// else the file on disk.
    fn resolve_blobs(&self, node: &Node, span: &CommandSpan) -> HashMap<String, Arc<Blob>> {
        let mut out = HashMap::new();
        let Some(path) = load_path(span, &node.text) else {
            return out;
        };
        let from_node = NodeName::new(path).ok().and_then(|n| node.blobs.get(&n).cloned());
        let blob = from_node.or_else(|| {
            let file = match &self.blob_dir {
                Some(dir) => dir.join(path),
                None => PathBuf::from(path),
            };
            self.fs_reads.fetch_add(1, Ordering::SeqCst);
            match std::fs::read_to_string(&file) {
                Ok(content) => Some(Arc::new(Blob::new(content, false))),
                Err(e) => {
                    log::debug!("cannot read {}: {e}", file.display());
                    None
                }
            }
        });
        if let Some(b) = blob {
            out.insert(path.to_string(), b);
        }
        out
    }

    /// Computes the assignment of `version`, reusing tasks whose inputs are
    /// unchanged, and cancels everything no longer assigned.
    fn schedule(&mut self, version: Arc<Version>) {
        let now = Instant::now();
        let mut evals: HashMap<String, ExecId> = HashMap::new();
        let mut prints: HashMap<(ExecId, String, Vec<String>), ExecId> = HashMap::new();
        for (&id, t) in &self.tasks {
            if t.dropped {
                continue;
            }
            match &t.work {
                Work::Eval { key, .. } if t.state != TaskState::Cancelled => {
                    evals.insert(key.clone(), id);
                }
                Work::Print { eval, function, args, .. } => {
                    prints.insert((*eval, function.clone(), args.clone()), id);
                }
                _ => {}
            }
        }

        let mut assignment = Assignment::default();
        let mut exits: HashMap<NodeName, (Source, String)> = HashMap::new();
        let mut created = Vec::new();
        let mut unknown = Vec::new();
        for name in version.topological_order() {
            let node = version.nodes[&name].clone();
            let imports: Vec<(Source, String)> =
                version.effective_imports(&name).iter().map(|i| exits[i].clone()).collect();
            let mut key_parts: Vec<&[u8]> = vec![b"entry", name.as_str().as_bytes()];
            let errors = node.header.errors.join("\n");
            key_parts.push(errors.as_bytes());
            for (_, k) in &imports {
                key_parts.push(k.as_bytes());
            }
            let mut key = hash_parts(&key_parts);
            let mut source = Source::Entry(Arc::new(Entry {
                node: name.clone(),
                header_errors: node.header.errors.clone(),
                imports: imports.into_iter().map(|(s, _)| s).collect(),
            }));
            let mut commands = Vec::with_capacity(node.spans.len());
            for (index, span) in node.spans.iter().enumerate() {
                let blobs = self.resolve_blobs(&node, span);
                let mut parts: Vec<&[u8]> = vec![key.as_bytes(), span.source(&node.text).as_bytes()];
                let mut blob_keys: Vec<(&String, &str)> = blobs.iter().map(|(p, b)| (p, b.digest.as_str())).collect();
                blob_keys.sort();
                for (p, d) in &blob_keys {
                    parts.push(p.as_bytes());
                    parts.push(d.as_bytes());
                }
                key = hash_parts(&parts);
                let eval = match evals.remove(&key) {
                    Some(id) => id,
                    None => {
                        let id = self.fresh_id();
                        self.tasks.insert(
                            id,
                            Task {
                                node: name.clone(),
                                span: span.clone(),
                                text: node.text.clone(),
                                work: Work::Eval {
                                    key: key.clone(),
                                    source: source.clone(),
                                    blobs: Arc::new(blobs),
                                    outcome: None,
                                },
                                state: TaskState::Pending,
                                control: None,
                                dropped: false,
                            },
                        );
                        created.push(id);
                        id
                    }
                };
                let mut ids = self.prints_for(&node, &name, index, span, eval, now, &prints, &mut created, &mut unknown);
                ids.sort_by_key(|id| match &self.tasks[id].work {
                    Work::Print { priority, .. } => (-(*priority as i64), *id),
                    Work::Eval { .. } => (i64::MIN, *id),
                });
                ids.dedup();
                ids.insert(0, eval);
                commands.push(ids);
                source = Source::After(eval);
            }
            exits.insert(name.clone(), (source, key));
            assignment.nodes.insert(name, commands);
        }

        let live: BTreeSet<ExecId> = assignment.ids().map(|(_, _, id)| id).collect();
        let stale: Vec<ExecId> = self.tasks.keys().filter(|id| !live.contains(id)).copied().collect();
        self.assignment = assignment.clone();
        self.assigned = Some(version.id);
        self.emit(Message::Assign { version: version.id, assignment });
        // after the assignment, so the editor sees the cancellations
        for id in stale {
            self.drop_task(id);
        }

        for (id, function) in unknown {
            let messages = vec![PrintMessage::new(OutputSeverity::Error, format!("unknown print function {function}"))];
            let entries = print_markup(&self.tasks[&id].span, &messages);
            self.complete(id, TaskState::Finished, entries, messages);
        }
        for id in created {
            self.try_submit(id);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn prints_for(
        &mut self,
        node: &Node,
        name: &NodeName,
        index: usize,
        span: &Arc<CommandSpan>,
        eval: ExecId,
        now: Instant,
        existing: &HashMap<(ExecId, String, Vec<String>), ExecId>,
        created: &mut Vec<ExecId>,
        unknown: &mut Vec<(ExecId, String)>,
    ) -> Vec<ExecId> {
        let mut wanted: Vec<(String, Vec<String>)> = Vec::new();
        let visible = node.perspective.covers(span.content_range());
        for spec in self.registry.specs().filter(|s| s.automatic && s.applies_to(span)) {
            let key = (eval, spec.name.clone(), Vec::new());
            if visible || (spec.persistent && existing.contains_key(&key)) {
                wanted.push((spec.name.clone(), Vec::new()));
            }
        }
        for o in node.perspective.overlays.iter().filter(|o| o.command == index) {
            wanted.push((o.function.clone(), o.args.clone()));
        }
        let mut ids = Vec::new();
        for (function, args) in wanted {
            if let Some(&id) = existing.get(&(eval, function.clone(), args.clone())) {
                ids.push(id);
                continue;
            }
            if let Some(&id) = ids.iter().find(|id| match &self.tasks[*id].work {
                Work::Print { function: f, args: a, .. } => *f == function && *a == args,
                Work::Eval { .. } => false,
            }) {
                ids.push(id);
                continue;
            }
            let id = self.fresh_id();
            let (priority, delay, timeout_ms, body) = match self.registry.get(&function) {
                Some((spec, body)) => (spec.priority, spec.delay_ms, spec.timeout_ms, Some(body.clone())),
                None => {
                    unknown.push((id, function.clone()));
                    (0, 0, 0, None)
                }
            };
            let state = if delay > 0 { TaskState::Delayed } else { TaskState::Pending };
            self.tasks.insert(
                id,
                Task {
                    node: name.clone(),
                    span: span.clone(),
                    text: node.text.clone(),
                    work: Work::Print {
                        eval,
                        function,
                        args,
                        priority,
                        not_before: now + Duration::from_millis(delay),
                        timeout_ms,
                        body,
                    },
                    state,
                    control: None,
                    dropped: false,
                },
            );
            if self.tasks[&id].work_body().is_some() {
                created.push(id);
            }
            ids.push(id);
        }
        ids
    }

    fn tiebreak(&self, id: ExecId) -> u64 {
        match self.seed {
            Some(seed) => splitmix(seed ^ splitmix(id.0)),
            None => id.0,
        }
    }

    fn context_of(&self, source: &Source) -> Option<CheckContext> {
        match source {
            Source::After(id) => match &self.tasks.get(id)?.work {
                Work::Eval { outcome: Some(o), .. } => Some(o.context.clone()),
                _ => None,
            },
            Source::Entry(e) => {
                let mut ctx = CheckContext::new(e.node.clone());
                for i in &e.imports {
                    ctx.import(&self.context_of(i)?);
                }
                ctx.header_errors = e.header_errors.clone();
                Some(ctx)
            }
        }
    }

    /// Submits a task whose dependencies are done, cancels one whose
    /// dependencies failed, or parks it until they finish.
    fn try_submit(&mut self, id: ExecId) {
        let Some(task) = self.tasks.get(&id) else { return };
        if task.control.is_some() || task.state.is_terminal() || task.dropped {
            return;
        }
        let mut deps = Vec::new();
        match &task.work {
            Work::Eval { source, .. } => source.deps(&mut deps),
            Work::Print { eval, .. } => deps.push(*eval),
        }
        for d in deps {
            match self.tasks.get(&d).map(|t| t.state) {
                Some(TaskState::Finished) => {}
                Some(s) if !s.is_terminal() => {
                    self.waiting.entry(d).or_default().push(id);
                    return;
                }
                _ => {
                    self.cancel(id);
                    return;
                }
            }
        }
        let events = self.events.clone();
        let task = &self.tasks[&id];
        let span = task.span.clone();
        let text = task.text.clone();
        let (job, not_before) = match &task.work {
            Work::Eval { source, blobs, .. } => {
                let Some(ctx) = self.context_of(source) else {
                    self.cancel(id);
                    return;
                };
                let prover = self.prover.clone();
                let blobs = blobs.clone();
                let control = Arc::new(TaskControl::new(None));
                let run = Box::new(move |_: &TaskControl| {
                    let _ = events.send(Event::Started(id));
                    let outcome = prover.check_command(&span, &text, &ctx, &*blobs);
                    let _ = events.send(Event::Finished(id, JobOutput::Eval(Arc::new(outcome))));
                });
                let rank = Rank { eval: true, priority: 0, tiebreak: self.tiebreak(id) };
                (Job { exec_id: id, rank, control, run }, None)
            }
            Work::Print { eval, args, priority, not_before, timeout_ms, body, .. } => {
                let body = body.clone().expect("submitted prints have a body");
                let outcome = match &self.tasks[eval].work {
                    Work::Eval { outcome: Some(o), .. } => o.clone(),
                    _ => unreachable!("dependency finished"),
                };
                let args = args.clone();
                let timeout = (*timeout_ms > 0).then(|| Duration::from_millis(*timeout_ms));
                let control = Arc::new(TaskControl::new(timeout));
                let run = Box::new(move |ctl: &TaskControl| {
                    let _ = events.send(Event::Started(id));
                    let input = PrintInput { span: &span, text: &text, outcome: &outcome, args: &args };
                    let result = body(&input, ctl).and_then(|msgs| ctl.check().map(|_| msgs));
                    let _ = events.send(Event::Finished(id, JobOutput::Print(result)));
                });
                let rank = Rank { eval: false, priority: *priority as i64, tiebreak: self.tiebreak(id) };
                (Job { exec_id: id, rank, control, run }, Some(*not_before))
            }
        };
        self.tasks.get_mut(&id).expect("present").control = Some(job.control.clone());
        self.pool.submit(job, not_before);
    }

    fn wake(&mut self, id: ExecId) {
        for w in self.waiting.remove(&id).unwrap_or_default() {
            self.try_submit(w);
        }
    }

    fn cancel(&mut self, id: ExecId) {
        let Some(task) = self.tasks.get_mut(&id) else {
            log::debug!("cancel of unknown task {id}");
            return;
        };
        if task.state.is_terminal() {
            return;
        }
        let withdrawn = match &task.control {
            None => true,
            Some(c) => {
                c.cancel();
                c.try_abandon()
            }
        };
        if withdrawn {
            task.state = TaskState::Cancelled;
            self.emit(Message::TaskState { exec_id: id, state: TaskState::Cancelled });
            self.wake(id);
            if self.tasks[&id].dropped {
                self.forget(id);
            }
        }
    }

    /// Removes a task from the assignment, cancelling it if unfinished.
    fn drop_task(&mut self, id: ExecId) {
        let Some(task) = self.tasks.get_mut(&id) else { return };
        task.dropped = true;
        if task.state.is_terminal() {
            self.forget(id);
        } else {
            self.cancel(id);
        }
    }

    fn forget(&mut self, id: ExecId) {
        self.tasks.remove(&id);
        self.retained.remove(&id);
        self.waiting.remove(&id);
    }

    fn started(&mut self, id: ExecId) {
        if let Some(t) = self.tasks.get_mut(&id) {
            if !t.state.is_terminal() {
                t.state = TaskState::Running;
                self.emit(Message::TaskState { exec_id: id, state: TaskState::Running });
            }
        }
    }

    fn finished(&mut self, id: ExecId, output: JobOutput) {
        let Some(task) = self.tasks.get_mut(&id) else { return };
        match output {
            JobOutput::Eval(outcome) => {
                let mut messages: Vec<PrintMessage> = Vec::new();
                if let Some(v) = &outcome.value {
                    messages.push(PrintMessage::new(OutputSeverity::Result, v.to_string()));
                }
                for d in &outcome.diagnostics {
                    let severity = match d.severity {
                        Severity::Error => OutputSeverity::Error,
                        Severity::Warning => OutputSeverity::Warning,
                        Severity::Information => OutputSeverity::Information,
                    };
                    messages.push(PrintMessage::new(severity, d.message.clone()));
                }
                let entries = outcome.entries.clone();
                if let Work::Eval { outcome: slot, .. } = &mut task.work {
                    *slot = Some(outcome);
                }
                self.complete(id, TaskState::Finished, entries, messages);
            }
            JobOutput::Print(Ok(messages)) => {
                let entries = print_markup(&task.span, &messages);
                self.complete(id, TaskState::Finished, entries, messages);
            }
            JobOutput::Print(Err(Interrupt::Cancelled)) => self.complete(id, TaskState::Cancelled, Vec::new(), Vec::new()),
            JobOutput::Print(Err(Interrupt::Timeout)) => {
                let limit = match &task.work {
                    Work::Print { timeout_ms, .. } => *timeout_ms,
                    Work::Eval { .. } => 0,
                };
                let messages = vec![PrintMessage::new(OutputSeverity::Warning, format!("timeout after {limit} ms"))];
                let entries = print_markup(&task.span, &messages);
                self.complete(id, TaskState::FailedTimeout, entries, messages);
            }
        }
    }

    /// Records a terminal state and publishes the task's results.
    fn complete(&mut self, id: ExecId, state: TaskState, entries: Vec<MarkupEntry>, messages: Vec<PrintMessage>) {
        let task = self.tasks.get_mut(&id).expect("completing a known task");
        task.state = state;
        let node = task.node.clone();
        if task.dropped {
            self.emit(Message::TaskState { exec_id: id, state });
            self.wake(id);
            self.forget(id);
            return;
        }
        if state != TaskState::Cancelled {
            let data = serde_json::to_string(&entries).expect("entries serialize");
            let digest = crate::document::sha256_hex(data.as_bytes());
            self.retained.insert(id, Retained { node: node.clone(), data, digest });
            if !self.hidden.contains(&node) {
                self.emit(Message::Report { exec_id: id, node, entries });
            }
            for m in messages {
                self.emit(Message::Output { exec_id: id, severity: m.severity, body: m.body, sendback: m.sendback });
            }
        }
        self.emit(Message::TaskState { exec_id: id, state });
        self.wake(id);
    }

    fn set_visibility(&mut self, node: NodeName, visible: bool) {
        if !self.history.latest().nodes.contains_key(&node) {
            self.emit(Message::error(format!("no such node {node}")));
            return;
        }
        if visible {
            if self.hidden.remove(&node) {
                let ids: Vec<ExecId> = self.assignment.node_ids(&node).collect();
                for id in ids {
                    if let Some(r) = self.retained.get(&id) {
                        if crate::document::sha256_hex(r.data.as_bytes()) != r.digest {
                            log::warn!("retained report of {id} in {} is corrupt", r.node);
                            continue;
                        }
                        let entries: Vec<MarkupEntry> = serde_json::from_str(&r.data).expect("retained entries parse");
                        self.emit(Message::Report { exec_id: id, node: node.clone(), entries });
                    }
                }
            }
        } else {
            self.hidden.insert(node);
        }
        if let Some(version) = self.assigned {
            let assignment = self.assignment.clone();
            self.emit(Message::Assign { version, assignment });
        }
    }
}

impl Task {
    fn work_body(&self) -> Option<&PrintBody> {
        match &self.work {
            Work::Print { body, .. } => body.as_ref(),
            Work::Eval { .. } => None,
        }
    }
}

/// Print messages as markup on the command keyword.
fn print_markup(span: &CommandSpan, messages: &[PrintMessage]) -> Vec<MarkupEntry> {
    let at = span.content().next().map_or(span.range, |t| t.range).unshift(span.range.start);
    let at = if at.is_empty() { Range::new(0, span.range.len()) } else { at };
    let mut out = Vec::new();
    for m in messages {
        let name = match m.severity {
            OutputSeverity::Error => names::ERROR,
            OutputSeverity::Warning => names::WARNING,
            OutputSeverity::Information | OutputSeverity::Result => names::INFORMATION,
        };
        out.push(MarkupEntry::new(at, MarkupElem::new(name).with("message", &m.body)));
        if let Some(text) = &m.sendback {
            out.push(MarkupEntry::new(at, MarkupElem::new(names::SENDBACK).with("text", text)));
        }
    }
    out
}
