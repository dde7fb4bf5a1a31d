//! C interface to in-process editing sessions.
//!
//! Every function returns a [`PideStatus`]. On failure the message is kept
//! per thread and can be read with [`pide_last_error`]. Strings handed out
//! by the library must be released with [`pide_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use pide::config::Config;
use pide::document::NodeName;
use pide::harness::{self, HarnessError, RunError, Script, Session};
use pide::Range;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PideStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    BadEdit = 4,
    Transport = 5,
    Timeout = 6,
    Script = 7,
    Assertion = 8,
    Io = 9,
    Panic = 10,
}

/// Opaque handle for a session with its own back-end.
pub struct PideSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(PideStatus, String);

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let status = match &e {
            HarnessError::Config(_) => PideStatus::Config,
            HarnessError::BadEdit(_) => PideStatus::BadEdit,
            HarnessError::Transport(_) => PideStatus::Transport,
            HarnessError::Timeout(_) => PideStatus::Timeout,
            HarnessError::Read { .. } | HarnessError::Io(_) => PideStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PideStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PideStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PideStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PideStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(PideStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn session<'a>(p: *mut PideSession) -> Result<&'a mut Session, Failure> {
    p.as_mut().map(|s| &mut s.inner).ok_or_else(|| Failure(PideStatus::NullArgument, "session is null".into()))
}

fn node(name: &str) -> Result<NodeName, Failure> {
    NodeName::new(name).map_err(|e| Failure(PideStatus::BadEdit, e.to_string()))
}

unsafe fn config_arg(p: *const c_char) -> Result<Config, Failure> {
    if p.is_null() {
        return Ok(Config::default());
    }
    Config::parse(str_arg(p, "config")?).map_err(|e| Failure(PideStatus::Config, e.to_string()))
}

unsafe fn give_string(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(PideStatus::NullArgument, "out is null".into()));
    }
    let c = CString::new(s).map_err(|_| Failure(PideStatus::InvalidUtf8, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn pide_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pide_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Starts a session with an in-process back-end. `config_toml` may be null
/// for defaults.
///
/// # Safety
/// Pointers must be valid; `out` receives a handle to free with
/// [`pide_session_free`].
#[no_mangle]
pub unsafe extern "C" fn pide_session_new(config_toml: *const c_char, out: *mut *mut PideSession) -> PideStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(PideStatus::NullArgument, "out is null".into()));
        }
        let config = config_arg(config_toml)?;
        let inner = Session::in_process(&config)?;
        *out = Box::into_raw(Box::new(PideSession { inner }));
        Ok(())
    })
}

/// Closes the session and stops its back-end. Null is ignored.
///
/// # Safety
/// `s` must come from [`pide_session_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pide_session_free(s: *mut PideSession) {
    if !s.is_null() {
        let _ = panic::catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(s))));
    }
}

/// Inserts `text` into `node` at byte `offset`, creating the node if needed.
///
/// # Safety
/// Pointers must be valid NUL-terminated strings and a live session.
#[no_mangle]
pub unsafe extern "C" fn pide_session_insert(
    s: *mut PideSession,
    node_name: *const c_char,
    offset: usize,
    text: *const c_char,
) -> PideStatus {
    guard(|| {
        let s = session(s)?;
        let n = node(str_arg(node_name, "node")?)?;
        s.insert(&n, offset, str_arg(text, "text")?)?;
        Ok(())
    })
}

/// Removes `len` bytes of `node` starting at `offset`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pide_session_remove(
    s: *mut PideSession,
    node_name: *const c_char,
    offset: usize,
    len: usize,
) -> PideStatus {
    guard(|| {
        let s = session(s)?;
        let n = node(str_arg(node_name, "node")?)?;
        s.remove(&n, offset, len)?;
        Ok(())
    })
}

/// Sets the visible ranges of `node`. `bounds` holds `count` start/end
/// pairs; `full` marks the whole node as required.
///
/// # Safety
/// `bounds` must point to `2 * count` values unless `count` is 0.
#[no_mangle]
pub unsafe extern "C" fn pide_session_set_perspective(
    s: *mut PideSession,
    node_name: *const c_char,
    bounds: *const usize,
    count: usize,
    full: bool,
) -> PideStatus {
    guard(|| {
        let s = session(s)?;
        let n = node(str_arg(node_name, "node")?)?;
        let pairs = if count == 0 {
            &[][..]
        } else if bounds.is_null() {
            return Err(Failure(PideStatus::NullArgument, "bounds is null".into()));
        } else {
            std::slice::from_raw_parts(bounds, 2 * count)
        };
        let mut ranges = Vec::with_capacity(count);
        for p in pairs.chunks(2) {
            if p[0] > p[1] {
                return Err(Failure(PideStatus::BadEdit, format!("range {}..{} is reversed", p[0], p[1])));
            }
            ranges.push(Range::new(p[0], p[1]));
        }
        s.set_perspective(&n, ranges, full)?;
        Ok(())
    })
}

/// Blocks until every assigned task of visible nodes has finished.
///
/// # Safety
/// `s` must be a live session.
#[no_mangle]
pub unsafe extern "C" fn pide_session_wait(s: *mut PideSession) -> PideStatus {
    guard(|| {
        session(s)?.wait()?;
        Ok(())
    })
}

/// Markup dump of `node`, or of all nodes when `node` is null.
///
/// # Safety
/// `out` receives a string to release with [`pide_string_free`].
#[no_mangle]
pub unsafe extern "C" fn pide_session_dump(
    s: *mut PideSession,
    node_name: *const c_char,
    eval_only: bool,
    out: *mut *mut c_char,
) -> PideStatus {
    guard(|| {
        let s = session(s)?;
        let dump = if node_name.is_null() {
            s.dump_all(eval_only)
        } else {
            s.dump(&node(str_arg(node_name, "node")?)?, eval_only)
        };
        give_string(dump, out)
    })
}

/// Current text of `node`.
///
/// # Safety
/// `out` receives a string to release with [`pide_string_free`].
#[no_mangle]
pub unsafe extern "C" fn pide_session_text(
    s: *mut PideSession,
    node_name: *const c_char,
    out: *mut *mut c_char,
) -> PideStatus {
    guard(|| {
        let s = session(s)?;
        let n = node(str_arg(node_name, "node")?)?;
        let text = s.text(&n).ok_or_else(|| Failure(PideStatus::BadEdit, format!("no such node {n}")))?;
        give_string(text.to_string(), out)
    })
}

/// Runs a session script in process and returns what it printed. A failed
/// assertion returns [`PideStatus::Assertion`] and still fills `out`.
///
/// # Safety
/// `config_toml` may be null; `out` receives a string to release with
/// [`pide_string_free`].
#[no_mangle]
pub unsafe extern "C" fn pide_run_script(
    script: *const c_char,
    config_toml: *const c_char,
    out: *mut *mut c_char,
) -> PideStatus {
    let mut failed = None;
    let status = guard(|| {
        let parsed = Script::parse(str_arg(script, "script")?).map_err(|e| Failure(PideStatus::Script, e.to_string()))?;
        let config = config_arg(config_toml)?;
        let mut s = Session::in_process(&config)?;
        let mut printed = Vec::new();
        let result = harness::run(&mut s, &parsed, &mut printed);
        give_string(String::from_utf8_lossy(&printed).into_owned(), out)?;
        match result {
            Ok(()) => Ok(()),
            Err(e @ RunError::Assertion { .. }) => {
                failed = Some(e.to_string());
                Ok(())
            }
            Err(RunError::Failed { line, error }) => {
                let Failure(status, msg) = error.into();
                Err(Failure(status, format!("line {line}: {msg}")))
            }
        }
    });
    match failed {
        Some(msg) if status == PideStatus::Ok => {
            set_error(msg);
            PideStatus::Assertion
        }
        _ => status,
    }
}
