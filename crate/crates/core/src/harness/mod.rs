//! Scripted front-end sessions, batch checking and the socket server.

mod script;
mod session;

use std::io;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

pub use script::{run, CancelTarget, Directive, RunError, Script, ScriptError, ScriptLine};
pub use session::{header_imports, OutputRecord, Session};

use crate::config::{Config, ConfigError};
use crate::document::{NodeEdit, NodeName, Perspective};
use crate::execution::Kernel;
use crate::protocol::{self, TransportError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no quiescence within {0:?}")]
    Timeout(Duration),
    #[error("{0}")]
    BadEdit(String),
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Checks the given theory files as one version with everything visible and
/// returns the dump of all nodes. Node names are the file names.
pub fn batch_check(paths: &[PathBuf], blob_dir: Option<&Path>, config: &Config, eval_only: bool) -> Result<String, HarnessError> {
    let mut edits = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|source| HarnessError::Read { path: p.display().to_string(), source })?;
        let name = p
            .file_name()
            .and_then(|f| f.to_str())
            .ok_or_else(|| HarnessError::BadEdit(format!("bad file name {}", p.display())))?;
        let node = NodeName::new(name)?;
        edits.push((node.clone(), NodeEdit::insert(0, text)));
        edits.push((node, NodeEdit::Perspective { perspective: Perspective::full() }));
    }
    let mut config = config.clone();
    if let Some(dir) = blob_dir {
        config.blob_dir = Some(dir.to_path_buf());
    }
    let mut session = Session::in_process(&config)?;
    if !edits.is_empty() {
        session.edit(edits)?;
        session.wait()?;
    }
    Ok(session.dump_all(eval_only))
}

/// Batch dump of in-memory texts, as `batch_check` would produce for files
/// with these names and contents.
pub fn batch_texts(texts: &[(NodeName, String)], config: &Config, eval_only: bool) -> Result<String, HarnessError> {
    let mut session = Session::in_process(config)?;
    let mut edits = Vec::new();
    for (node, text) in texts {
        edits.push((node.clone(), NodeEdit::insert(0, text.clone())));
        edits.push((node.clone(), NodeEdit::Perspective { perspective: Perspective::full() }));
    }
    if !edits.is_empty() {
        session.edit(edits)?;
        session.wait()?;
    }
    Ok(session.dump_all(eval_only))
}

/// Accepts connections and serves each with its own back-end. Stops after
/// `limit` connections when given.
pub fn serve(listener: TcpListener, config: &Config, limit: Option<usize>) -> Result<(), HarnessError> {
    let mut handles = Vec::new();
    let mut served = 0;
    while limit.is_none_or(|l| served < l) {
        let endpoint = match protocol::accept(&listener) {
            Ok(e) => e,
            Err(TransportError::Handshake(e)) => {
                log::warn!("rejected connection: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        served += 1;
        let kernel = config.kernel();
        let registry = config.registry()?;
        handles.push(thread::spawn(move || Kernel::serve(kernel, registry, endpoint)));
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}
