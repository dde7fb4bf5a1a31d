//! Session scripts: one directive per line, `#` starts a comment.

use std::fmt;
use std::io::Write;

use crate::document::{NodeName, Overlay};
use crate::execution::ExecId;
use crate::range::Range;

use super::session::Session;
use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CancelTarget {
    Last,
    Id(ExecId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Directive {
    Open(NodeName),
    Insert { node: NodeName, offset: usize, text: String },
    Remove { node: NodeName, offset: usize, len: usize },
    /// `full` marks the whole node visible.
    Perspective { node: NodeName, ranges: Vec<Range>, full: bool },
    Overlay { node: NodeName, overlay: Overlay },
    RemoveOverlay { node: NodeName, overlay: Overlay },
    Blob { node: NodeName, path: String, content: String },
    Hide(NodeName),
    Show(NodeName),
    Wait,
    Dump { node: NodeName, eval_only: bool },
    Complete { node: NodeName, offset: usize },
    Hyperlink { node: NodeName, offset: usize },
    Sendback { node: NodeName, command: usize },
    Cancel(CancelTarget),
    AssertContains { node: NodeName, needle: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptLine {
    pub number: usize,
    pub directive: Directive,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Script {
    pub lines: Vec<ScriptLine>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

/// Splits a line into words. Double-quoted words take `\"`, `\\`, `\n` and
/// `\t` escapes; any other backslash is kept, so `\<in>` needs no escaping.
fn words(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.next_if(|c| c.is_whitespace()).is_some() {}
        let Some(&c) = chars.peek() else { return Ok(out) };
        if c == '#' {
            return Ok(out);
        }
        let mut word = String::new();
        if c == '"' {
            chars.next();
            loop {
                match chars.next() {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some('"') => word.push('"'),
                        Some('\\') => word.push('\\'),
                        Some('n') => word.push('\n'),
                        Some('t') => word.push('\t'),
                        Some(other) => {
                            word.push('\\');
                            word.push(other);
                        }
                        None => return Err("unterminated string".into()),
                    },
                    Some(other) => word.push(other),
                }
            }
            if chars.peek().is_some_and(|c| !c.is_whitespace()) {
                return Err("missing space after string".into());
            }
        } else {
            while let Some(c) = chars.next_if(|c| !c.is_whitespace()) {
                word.push(c);
            }
        }
        out.push(word);
    }
}

fn node(w: &str) -> Result<NodeName, String> {
    NodeName::new(w).map_err(|e| e.to_string())
}

fn number<T: std::str::FromStr>(w: &str, what: &str) -> Result<T, String> {
    w.parse().map_err(|_| format!("bad {what}: {w}"))
}

fn directive(words: &[String]) -> Result<Directive, String> {
    let w: Vec<&str> = words.iter().map(String::as_str).collect();
    let arity = |n: usize| {
        if w.len() == n + 1 {
            Ok(())
        } else {
            Err(format!("{} takes {n} argument{}", w[0], if n == 1 { "" } else { "s" }))
        }
    };
    let overlay = |w: &[&str]| -> Result<(NodeName, Overlay), String> {
        if w.len() < 4 {
            return Err(format!("usage: {} NODE CMD_INDEX FUNCTION ARG*", w[0]));
        }
        let overlay = Overlay {
            command: number(w[2], "command index")?,
            function: w[3].to_string(),
            args: w[4..].iter().map(|s| s.to_string()).collect(),
        };
        Ok((node(w[1])?, overlay))
    };
    Ok(match w[0] {
        "open" => {
            arity(1)?;
            Directive::Open(node(w[1])?)
        }
        "insert" => {
            arity(3)?;
            Directive::Insert { node: node(w[1])?, offset: number(w[2], "offset")?, text: w[3].to_string() }
        }
        "remove" => {
            arity(3)?;
            Directive::Remove { node: node(w[1])?, offset: number(w[2], "offset")?, len: number(w[3], "length")? }
        }
        "perspective" => {
            if w.len() < 2 {
                return Err("usage: perspective NODE (full | START END ...)".into());
            }
            let node = node(w[1])?;
            if w[2..] == ["full"] {
                Directive::Perspective { node, ranges: Vec::new(), full: true }
            } else {
                if !w.len().is_multiple_of(2) {
                    return Err("perspective ranges come in START END pairs".into());
                }
                let mut ranges = Vec::new();
                for pair in w[2..].chunks(2) {
                    let (start, end) = (number(pair[0], "offset")?, number(pair[1], "offset")?);
                    if start > end {
                        return Err(format!("reversed range {start} {end}"));
                    }
                    ranges.push(Range::new(start, end));
                }
                Directive::Perspective { node, ranges, full: false }
            }
        }
        "overlay" => {
            let (node, overlay) = overlay(&w)?;
            Directive::Overlay { node, overlay }
        }
        "remove-overlay" => {
            let (node, overlay) = overlay(&w)?;
            Directive::RemoveOverlay { node, overlay }
        }
        "blob" => {
            arity(3)?;
            Directive::Blob { node: node(w[1])?, path: w[2].to_string(), content: w[3].to_string() }
        }
        "hide" => {
            arity(1)?;
            Directive::Hide(node(w[1])?)
        }
        "show" => {
            arity(1)?;
            Directive::Show(node(w[1])?)
        }
        "wait" => {
            arity(0)?;
            Directive::Wait
        }
        "dump" => match w[1..] {
            [n] => Directive::Dump { node: node(n)?, eval_only: false },
            [n, "--eval-only"] => Directive::Dump { node: node(n)?, eval_only: true },
            _ => return Err("usage: dump NODE [--eval-only]".into()),
        },
        "complete" => {
            arity(2)?;
            Directive::Complete { node: node(w[1])?, offset: number(w[2], "offset")? }
        }
        "hyperlink" => {
            arity(2)?;
            Directive::Hyperlink { node: node(w[1])?, offset: number(w[2], "offset")? }
        }
        "sendback" => {
            arity(2)?;
            Directive::Sendback { node: node(w[1])?, command: number(w[2], "command index")? }
        }
        "cancel" => {
            arity(1)?;
            Directive::Cancel(match w[1] {
                "LAST" => CancelTarget::Last,
                id => CancelTarget::Id(ExecId(number(id, "exec id")?)),
            })
        }
        "assert-contains" => {
            arity(2)?;
            Directive::AssertContains { node: node(w[1])?, needle: w[2].to_string() }
        }
        other => return Err(format!("unknown directive {other}")),
    })
}

impl Script {
    /// Parses and validates a whole script before anything runs.
    pub fn parse(text: &str) -> Result<Script, ScriptError> {
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let number = i + 1;
            let err = |message: String| ScriptError { line: number, message };
            let w = words(line).map_err(err)?;
            if w.is_empty() {
                continue;
            }
            lines.push(ScriptLine { number, directive: directive(&w).map_err(err)? });
        }
        Ok(Script { lines })
    }
}

/// Why a script stopped early.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("line {line}: assertion failed: {message}")]
    Assertion { line: usize, message: String },
    #[error("line {line}: {error}")]
    Failed { line: usize, error: HarnessError },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Assertion { .. } => super::EXIT_ASSERTION,
            RunError::Failed { .. } => super::EXIT_ERROR,
        }
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Runs the directives in order, writing query results to `out`.
pub fn run(session: &mut Session, script: &Script, out: &mut dyn Write) -> Result<(), RunError> {
    for line in &script.lines {
        let n = line.number;
        let failed = |error: HarnessError| RunError::Failed { line: n, error };
        step(session, &line.directive, out).map_err(|e| match e {
            Step::Assertion(message) => RunError::Assertion { line: n, message },
            Step::Error(e) => failed(e),
        })?;
    }
    Ok(())
}

enum Step {
    Assertion(String),
    Error(HarnessError),
}

impl From<HarnessError> for Step {
    fn from(e: HarnessError) -> Self {
        Step::Error(e)
    }
}

impl From<std::io::Error> for Step {
    fn from(e: std::io::Error) -> Self {
        Step::Error(HarnessError::Io(e))
    }
}

fn step(s: &mut Session, d: &Directive, out: &mut dyn Write) -> Result<(), Step> {
    match d {
        Directive::Open(node) => drop(s.open(node)?),
        Directive::Insert { node, offset, text } => drop(s.insert(node, *offset, text)?),
        Directive::Remove { node, offset, len } => drop(s.remove(node, *offset, *len)?),
        Directive::Perspective { node, ranges, full } => drop(s.set_perspective(node, ranges.clone(), *full)?),
        Directive::Overlay { node, overlay } => drop(s.add_overlay(node, overlay.clone())?),
        Directive::RemoveOverlay { node, overlay } => drop(s.remove_overlay(node, overlay)?),
        Directive::Blob { node, path, content } => drop(s.set_blob(node, path, content)?),
        Directive::Hide(node) => s.set_visibility(node, false)?,
        Directive::Show(node) => s.set_visibility(node, true)?,
        Directive::Wait => s.wait()?,
        Directive::Dump { node, eval_only } => {
            s.drain()?;
            out.write_all(s.dump(node, *eval_only).as_bytes())?;
        }
        Directive::Complete { node, offset } => {
            s.drain()?;
            let (items, truncated) = s.complete(node, *offset)?;
            for item in &items {
                writeln!(out, "{node} {item}")?;
            }
            if truncated {
                writeln!(out, "{node} {offset} truncated")?;
            }
        }
        Directive::Hyperlink { node, offset } => {
            s.drain()?;
            match s.hyperlink(node, *offset)? {
                Some((target, r)) => writeln!(out, "{node} {offset} -> {target} {} {}", r.start, r.end)?,
                None => writeln!(out, "{node} {offset} -> none")?,
            }
        }
        Directive::Sendback { node, command } => {
            s.drain()?;
            drop(s.sendback(node, *command)?);
        }
        Directive::Cancel(target) => {
            s.drain()?;
            let id = match target {
                CancelTarget::Id(id) => *id,
                CancelTarget::Last => {
                    s.last_print().ok_or_else(|| HarnessError::BadEdit("no print task to cancel".into()))?
                }
            };
            s.cancel(id)?;
        }
        Directive::AssertContains { node, needle } => {
            s.drain()?;
            let dump = s.dump(node, false);
            if !dump.contains(needle.as_str()) {
                return Err(Step::Assertion(format!("dump of {node} does not contain {needle:?}")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> NodeName {
        NodeName::new(s).unwrap()
    }

    #[test]
    fn parses_directives() {
        let text = "# comment\nopen S.thy\ninsert S.thy 0 \"eval \\\"x\\\" \\<in>\\n\"  # trailing\n\nperspective S.thy full\nperspective S.thy 0 4 6 9\noverlay S.thy 0 search_factor 100\ncancel LAST\ncancel 7\ndump S.thy --eval-only\n";
        let s = Script::parse(text).unwrap();
        let d: Vec<&Directive> = s.lines.iter().map(|l| &l.directive).collect();
        assert_eq!(s.lines[0].number, 2);
        assert_eq!(*d[1], Directive::Insert { node: n("S.thy"), offset: 0, text: "eval \"x\" \\<in>\n".into() });
        assert_eq!(*d[2], Directive::Perspective { node: n("S.thy"), ranges: vec![], full: true });
        assert_eq!(
            *d[3],
            Directive::Perspective { node: n("S.thy"), ranges: vec![Range::new(0, 4), Range::new(6, 9)], full: false }
        );
        assert_eq!(
            *d[4],
            Directive::Overlay {
                node: n("S.thy"),
                overlay: Overlay { command: 0, function: "search_factor".into(), args: vec!["100".into()] }
            }
        );
        assert_eq!(*d[5], Directive::Cancel(CancelTarget::Last));
        assert_eq!(*d[6], Directive::Cancel(CancelTarget::Id(ExecId(7))));
        assert_eq!(*d[7], Directive::Dump { node: n("S.thy"), eval_only: true });
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = Script::parse("open A.thy\n\nfrobnicate A.thy\n").unwrap_err();
        assert_eq!(e, ScriptError { line: 3, message: "unknown directive frobnicate".into() });
        assert_eq!(Script::parse("wait now").unwrap_err().message, "wait takes 0 arguments");
        assert_eq!(Script::parse("insert A.thy 0 \"abc").unwrap_err().message, "unterminated string");
        assert_eq!(Script::parse("remove A.thy x 1").unwrap_err().message, "bad offset: x");
        assert_eq!(Script::parse("perspective A.thy 1").unwrap_err().line, 1);
        assert!(Script::parse("open ..").is_err());
    }
}
