//! Task execution: EVAL tasks check commands, PRINT tasks produce extra
//! output from a checked command.
//!
//! A single coordinator ([`Kernel`]) owns all scheduling state. Task bodies
//! run on a worker pool and report back through the coordinator's event
//! channel. Cancellation is cooperative: bodies poll their [`TaskControl`].

mod builtins;
mod kernel;
mod pool;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU8, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::document::NodeName;
use crate::prover::CheckOutcome;
use crate::protocol::OutputSeverity;
use crate::sources::CommandSpan;

pub use builtins::{auto_digits, search_factor, smallest_factor};
pub use kernel::{Kernel, KernelConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExecId(pub u64);

impl fmt::Display for ExecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Delayed,
    Running,
    Finished,
    Cancelled,
    FailedTimeout,
}

impl TaskState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::Finished | TaskState::Cancelled | TaskState::FailedTimeout)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskState::Pending => "pending",
            TaskState::Delayed => "delayed",
            TaskState::Running => "running",
            TaskState::Finished => "finished",
            TaskState::Cancelled => "cancelled",
            TaskState::FailedTimeout => "failed_timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskKind {
    Eval,
    Print { function: String, args: Vec<String> },
}

/// Exec ids per node and command index: the EVAL id first, then the PRINT
/// ids ordered by priority (descending) and id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    pub nodes: BTreeMap<NodeName, Vec<Vec<ExecId>>>,
}

impl Assignment {
    pub fn command(&self, node: &NodeName, index: usize) -> Option<&[ExecId]> {
        self.nodes.get(node)?.get(index).map(Vec::as_slice)
    }

    pub fn eval(&self, node: &NodeName, index: usize) -> Option<ExecId> {
        self.command(node, index)?.first().copied()
    }

    /// All ids of `node`, in command order.
    pub fn node_ids(&self, node: &NodeName) -> impl Iterator<Item = ExecId> + '_ {
        self.nodes.get(node).into_iter().flatten().flatten().copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = (&NodeName, usize, ExecId)> + '_ {
        self.nodes
            .iter()
            .flat_map(|(n, cmds)| cmds.iter().enumerate().flat_map(move |(i, ids)| ids.iter().map(move |&id| (n, i, id))))
    }
}

/// Parameters of a print function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrintFunctionSpec {
    pub name: String,
    pub delay_ms: u64,
    /// 0 means unlimited.
    pub timeout_ms: u64,
    /// Higher runs first.
    pub priority: i32,
    /// Results survive loss of visibility.
    pub persistent: bool,
    /// Attached to every eligible visible command without an overlay.
    pub automatic: bool,
    /// Command keywords an automatic print applies to; empty means all.
    #[serde(default)]
    pub commands: Vec<String>,
}

impl PrintFunctionSpec {
    pub fn applies_to(&self, span: &CommandSpan) -> bool {
        self.commands.is_empty() || self.commands.contains(&span.name)
    }
}

/// Why a task body stopped early.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interrupt {
    Cancelled,
    Timeout,
}

const QUEUED: u8 = 0;
const RUNNING: u8 = 1;
const ABANDONED: u8 = 2;

/// Cancellation flag and time limit of one task, shared between the
/// coordinator and the worker running it.
#[derive(Debug)]
pub struct TaskControl {
    cancelled: AtomicBool,
    phase: AtomicU8,
    timeout: Option<Duration>,
    started: OnceLock<Instant>,
}

impl TaskControl {
    pub fn new(timeout: Option<Duration>) -> Self {
        TaskControl { cancelled: AtomicBool::new(false), phase: AtomicU8::new(QUEUED), timeout, started: OnceLock::new() }
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::SeqCst)
    }

    /// The poll point for task bodies.
    pub fn check(&self) -> Result<(), Interrupt> {
        if self.is_cancelled() {
            return Err(Interrupt::Cancelled);
        }
        match (self.timeout, self.started.get()) {
            (Some(limit), Some(t0)) if t0.elapsed() > limit => Err(Interrupt::Timeout),
            _ => Ok(()),
        }
    }

    pub fn started_at(&self) -> Option<Instant> {
        self.started.get().copied()
    }

    /// Claims the task for running; fails if it was abandoned first.
    pub(crate) fn try_start(&self) -> bool {
        let ok = self.phase.compare_exchange(QUEUED, RUNNING, Ordering::SeqCst, Ordering::SeqCst).is_ok();
        if ok {
            let _ = self.started.set(Instant::now());
        }
        ok
    }

    /// Withdraws a queued task; fails if a worker already started it.
    pub(crate) fn try_abandon(&self) -> bool {
        self.phase.compare_exchange(QUEUED, ABANDONED, Ordering::SeqCst, Ordering::SeqCst).is_ok()
    }
}

/// What a print body sees: the command and the result of its EVAL.
pub struct PrintInput<'a> {
    pub span: &'a CommandSpan,
    pub text: &'a str,
    pub outcome: &'a CheckOutcome,
    pub args: &'a [String],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrintMessage {
    pub severity: OutputSeverity,
    pub body: String,
    pub sendback: Option<String>,
}

impl PrintMessage {
    pub fn new(severity: OutputSeverity, body: impl Into<String>) -> Self {
        PrintMessage { severity, body: body.into(), sendback: None }
    }
}

pub type PrintBody = Arc<dyn Fn(&PrintInput, &TaskControl) -> Result<Vec<PrintMessage>, Interrupt> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("print function {0} already registered")]
    Duplicate(String),
    #[error("unknown print function {0}")]
    Unknown(String),
}

/// Overridable print function parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrintParams {
    pub delay_ms: Option<u64>,
    pub timeout_ms: Option<u64>,
    pub priority: Option<i32>,
    pub persistent: Option<bool>,
}

#[derive(Clone, Default)]
pub struct Registry {
    functions: IndexMap<String, (PrintFunctionSpec, PrintBody)>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.functions.values().map(|(s, _)| s)).finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Registry with `auto_digits` and `search_factor`.
    pub fn with_builtins() -> Self {
        let mut r = Registry::new();
        let (spec, body) = auto_digits();
        r.register(spec, body).expect("fresh registry");
        let (spec, body) = search_factor();
        r.register(spec, body).expect("fresh registry");
        r
    }

    pub fn register(&mut self, spec: PrintFunctionSpec, body: PrintBody) -> Result<(), RegistryError> {
        if self.functions.contains_key(&spec.name) {
            return Err(RegistryError::Duplicate(spec.name));
        }
        self.functions.insert(spec.name.clone(), (spec, body));
        Ok(())
    }

    pub fn configure(&mut self, name: &str, params: &PrintParams) -> Result<(), RegistryError> {
        let (spec, _) = self.functions.get_mut(name).ok_or_else(|| RegistryError::Unknown(name.into()))?;
        if let Some(v) = params.delay_ms {
            spec.delay_ms = v;
        }
        if let Some(v) = params.timeout_ms {
            spec.timeout_ms = v;
        }
        if let Some(v) = params.priority {
            spec.priority = v;
        }
        if let Some(v) = params.persistent {
            spec.persistent = v;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&(PrintFunctionSpec, PrintBody)> {
        self.functions.get(name)
    }

    pub fn specs(&self) -> impl Iterator<Item = &PrintFunctionSpec> {
        self.functions.values().map(|(s, _)| s)
    }
}
