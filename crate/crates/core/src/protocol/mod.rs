//! Messages exchanged between the editor front-end and the prover back-end.
//!
//! Each message is one line of JSON with a `kind` field and sorted keys.

mod transport;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::document::{NodeEdit, NodeName, VersionId};
use crate::execution::{Assignment, ExecId, TaskState};
use crate::markup::MarkupEntry;

pub use transport::{accept, connect, in_process, read_messages, Endpoint, LineSender, TransportError};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSeverity {
    Result,
    Information,
    Warning,
    Error,
}

impl OutputSeverity {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputSeverity::Result => "result",
            OutputSeverity::Information => "information",
            OutputSeverity::Warning => "warning",
            OutputSeverity::Error => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    Hello {
        protocol: u32,
    },
    // front-end to back-end
    Update {
        parent_version: VersionId,
        new_version: VersionId,
        edits: Vec<(NodeName, NodeEdit)>,
    },
    Cancel {
        exec_id: ExecId,
    },
    RemoveVersions {
        ids: Vec<VersionId>,
    },
    SetVisibility {
        node: NodeName,
        visible: bool,
    },
    RegisterDictionary {
        path: String,
    },
    // back-end to front-end
    Assign {
        version: VersionId,
        assignment: Assignment,
    },
    Report {
        exec_id: ExecId,
        node: NodeName,
        entries: Vec<MarkupEntry>,
    },
    Output {
        exec_id: ExecId,
        severity: OutputSeverity,
        body: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sendback: Option<String>,
    },
    TaskState {
        exec_id: ExecId,
        state: TaskState,
    },
    ProtocolError {
        text: String,
    },
}

const KINDS: &[&str] = &[
    "hello",
    "update",
    "cancel",
    "remove_versions",
    "set_visibility",
    "register_dictionary",
    "assign",
    "report",
    "output",
    "task_state",
    "protocol_error",
];

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Update { .. } => "update",
            Message::Cancel { .. } => "cancel",
            Message::RemoveVersions { .. } => "remove_versions",
            Message::SetVisibility { .. } => "set_visibility",
            Message::RegisterDictionary { .. } => "register_dictionary",
            Message::Assign { .. } => "assign",
            Message::Report { .. } => "report",
            Message::Output { .. } => "output",
            Message::TaskState { .. } => "task_state",
            Message::ProtocolError { .. } => "protocol_error",
        }
    }

    pub fn hello() -> Self {
        Message::Hello { protocol: PROTOCOL_VERSION }
    }

    pub fn error(text: impl Into<String>) -> Self {
        Message::ProtocolError { text: text.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct DecodeError(pub String);

impl From<DecodeError> for Message {
    fn from(e: DecodeError) -> Self {
        Message::ProtocolError { text: e.0 }
    }
}

/// Encodes one message as a canonical line: keys sorted, `\n` terminated.
pub fn encode(msg: &Message) -> String {
    // serde_json's default map is ordered by key.
    let value = serde_json::to_value(msg).expect("messages serialize");
    let mut line = serde_json::to_string(&value).expect("values serialize");
    line.push('\n');
    line
}

/// Decodes one line; a trailing newline is accepted. Key order is irrelevant.
pub fn decode(line: &str) -> Result<Message, DecodeError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| DecodeError(format!("malformed message: {e}")))?;
    let kind = value
        .get("kind")
        .ok_or_else(|| DecodeError("malformed message: missing kind".into()))?;
    let kind = kind
        .as_str()
        .ok_or_else(|| DecodeError("malformed message: kind is not a string".into()))?
        .to_string();
    if !KINDS.contains(&kind.as_str()) {
        return Err(DecodeError(format!("unknown kind: {kind}")));
    }
    serde_json::from_value(value).map_err(|e| DecodeError(format!("malformed {kind} message: {e}")))
}

/// Message log in canonical form: front-end lines in order, then back-end
/// lines sorted, so that logs of runs with different interleavings agree.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MessageLog {
    pub sent: Vec<String>,
    pub received: Vec<String>,
}

impl MessageLog {
    pub fn canonical(&self) -> String {
        let mut received = self.received.clone();
        received.sort();
        let mut out = String::new();
        for l in &self.sent {
            out.push_str("> ");
            out.push_str(l);
        }
        for l in &received {
            out.push_str("< ");
            out.push_str(l);
        }
        out
    }

    /// Number of logged messages per kind.
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for l in self.sent.iter().chain(&self.received) {
            if let Ok(msg) = decode(l) {
                *m.entry(msg.kind()).or_default() += 1;
            }
        }
        m
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(encode(self).trim_end())
    }
}

#[cfg(test)]
mod tests;
