//! End-to-end acceptance checks. Run with `cargo test --test acceptance`;
//! prints one PASS/FAIL line per criterion and exits non-zero on failure.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use pide::completion::{Dictionary, ItemKind, ItemSource};
use pide::config::Config;
use pide::document::{Blob, NodeEdit, NodeHeader, NodeName, Overlay, Perspective, TextEdit, VersionId};
use pide::execution::{Assignment, ExecId, TaskState};
use pide::harness::{self, Script, Session};
use pide::markup::{MarkupElem, MarkupEntry};
use pide::protocol::{decode, encode, Message, OutputSeverity};
use pide::Range;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn n(s: &str) -> NodeName {
    NodeName::new(s).unwrap()
}

fn fast() -> Config {
    Config::parse("[print.auto_digits]\ndelay_ms = 0\n").unwrap()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// random theory material

struct Gen {
    rng: ChaCha8Rng,
    names: Vec<String>,
    fresh: usize,
}

impl Gen {
    fn new(seed: u64) -> Self {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), names: Vec::new(), fresh: 0 }
    }

    fn expr(&mut self, depth: usize) -> String {
        let choices = if depth >= 2 { 2 } else { 4 };
        match self.rng.random_range(0..choices) {
            0 => self.rng.random_range(0..1000u32).to_string(),
            1 if !self.names.is_empty() && self.rng.random_bool(0.9) => {
                self.names[self.rng.random_range(0..self.names.len())].clone()
            }
            1 => "zz".into(),
            2 => format!("{} + {}", self.expr(depth + 1), self.expr(depth + 1)),
            _ => format!("({}) * {}", self.expr(depth + 1), self.expr(depth + 1)),
        }
    }

    fn command(&mut self) -> String {
        match self.rng.random_range(0..10) {
            0..=3 => {
                let body = self.expr(0);
                self.fresh += 1;
                let name = format!("v{}", self.fresh);
                self.names.push(name.clone());
                format!("def {name} = {body}")
            }
            4..=7 => format!("eval {}", self.expr(0)),
            8 => format!("check {} : int", self.expr(0)),
            _ => "text \"prose @{term \\\"v1\\\"}\"".into(),
        }
    }

    fn theory(&mut self, name: &str, imports: &str, commands: usize) -> String {
        let mut text = format!("theory {name} imports {imports} begin");
        for _ in 0..commands {
            text.push('\n');
            text.push_str(&self.command());
        }
        text.push_str("\nend");
        text
    }

    fn ranges(&mut self, len: usize) -> Vec<Range> {
        (0..self.rng.random_range(0..3))
            .map(|_| {
                let a = self.rng.random_range(0..=len);
                let b = self.rng.random_range(a..=len);
                Range::new(a, b)
            })
            .collect()
    }
}

fn line_starts(text: &str) -> Vec<usize> {
    text.match_indices('\n').map(|(i, _)| i).collect()
}

/// A random text edit that keeps the theory within `max_commands` lines.
fn text_edit(g: &mut Gen, text: &str, max_commands: usize) -> NodeEdit {
    let breaks = line_starts(text);
    match g.rng.random_range(0..4) {
        0 | 1 if breaks.len() <= max_commands => {
            let at = breaks[g.rng.random_range(0..breaks.len())];
            NodeEdit::insert(at, format!("\n{}", g.command()))
        }
        0..=2 if breaks.len() >= 2 => {
            // drop one body line together with its leading newline
            let i = g.rng.random_range(0..breaks.len() - 1);
            NodeEdit::remove(breaks[i], breaks[i + 1] - breaks[i])
        }
        _ => {
            let at = g.rng.random_range(0..=text.len());
            if g.rng.random_bool(0.5) && at < text.len() {
                NodeEdit::remove(at, 1)
            } else {
                let c = b" 0123456789+*v()"[g.rng.random_range(0..16)] as char;
                NodeEdit::insert(at, c.to_string())
            }
        }
    }
}

fn eval_ids(a: &Assignment) -> BTreeMap<NodeName, Vec<ExecId>> {
    a.nodes.iter().map(|(k, v)| (k.clone(), v.iter().map(|ids| ids[0]).collect())).collect()
}

// ---------------------------------------------------------------------------
// 1

fn monotonicity() -> Outcome {
    let nodes = [n("A.thy"), n("B.thy")];
    let mut checked = 0;
    for seed in 0..100u64 {
        let mut g = Gen::new(1_000 + seed);
        let mut s = Session::in_process(&fast()).map_err(err)?;
        let (ka, kb) = (g.rng.random_range(2..8), g.rng.random_range(2..8));
        let a = g.theory("A", "", ka);
        let b = g.theory("B", "A", kb);
        s.edit(vec![(nodes[0].clone(), NodeEdit::insert(0, a)), (nodes[1].clone(), NodeEdit::insert(0, b))])
            .map_err(err)?;
        let mut overlays: Vec<(NodeName, Overlay)> = Vec::new();
        for _ in 0..12 {
            let node = nodes[g.rng.random_range(0..2)].clone();
            let text = s.text(&node).unwrap().to_string();
            let op = g.rng.random_range(0..10);
            if op < 4 {
                let e = text_edit(&mut g, &text, 12);
                s.edit(vec![(node, e)]).map_err(err)?;
                if g.rng.random_bool(0.3) {
                    s.wait().map_err(err)?;
                }
                continue;
            }
            s.sync().map_err(err)?;
            let before = eval_ids(s.assignment());
            if op < 7 {
                let ranges = g.ranges(text.len());
                let full = g.rng.random_bool(0.2);
                s.set_perspective(&node, ranges, full).map_err(err)?;
            } else if !overlays.is_empty() && g.rng.random_bool(0.4) {
                let (node, o) = overlays.swap_remove(g.rng.random_range(0..overlays.len()));
                s.remove_overlay(&node, &o).map_err(err)?;
            } else {
                let count = s.latest().node(&node).map_err(err)?.spans.len();
                let o = Overlay {
                    command: g.rng.random_range(0..count.max(1)),
                    function: "search_factor".into(),
                    args: vec!["40".into()],
                };
                s.add_overlay(&node, o.clone()).map_err(err)?;
                overlays.push((node, o));
            }
            s.sync().map_err(err)?;
            let after = eval_ids(s.assignment());
            ensure!(before == after, "seed {seed}: EVAL ids changed on a perspective-only edit");
            checked += 1;
        }
        s.wait().map_err(err)?;
        for ids in eval_ids(s.assignment()).values() {
            for id in ids {
                ensure!(s.state(*id) != TaskState::Cancelled, "seed {seed}: assigned EVAL {id} cancelled");
            }
        }
    }
    Ok(format!("100 scripts, {checked} perspective/overlay edits kept every EVAL"))
}

// ---------------------------------------------------------------------------
// 2

fn convergence() -> Outcome {
    let names = [n("A.thy"), n("B.thy"), n("C.thy")];
    let config = fast();
    for seed in 0..100u64 {
        let mut g = Gen::new(2_000 + seed);
        let mut s = Session::in_process(&config).map_err(err)?;
        let count = g.rng.random_range(1..=3);
        let headers = ["", "A", "A B"];
        let mut edits = Vec::new();
        for (i, node) in names.iter().take(count).enumerate() {
            let k = g.rng.random_range(1..=16 / count);
            let text = g.theory(["A", "B", "C"][i], headers[i], k);
            edits.push((node.clone(), NodeEdit::insert(0, text)));
        }
        s.edit(edits).map_err(err)?;
        for _ in 0..g.rng.random_range(5..25) {
            let node = names[g.rng.random_range(0..count)].clone();
            let text = s.text(&node).unwrap().to_string();
            let total: usize = names.iter().filter_map(|m| s.text(m)).map(|t| line_starts(t).len()).sum();
            match g.rng.random_range(0..10) {
                0..=5 => {
                    let e = text_edit(&mut g, &text, if total < 50 { usize::MAX } else { 0 });
                    s.edit(vec![(node, e)]).map_err(err)?;
                }
                6 | 7 => {
                    let ranges = g.ranges(text.len());
                    s.set_perspective(&node, ranges, g.rng.random_bool(0.3)).map_err(err)?;
                }
                _ => {
                    let count = s.latest().node(&node).map_err(err)?.spans.len();
                    let o = Overlay {
                        command: g.rng.random_range(0..count.max(1)),
                        function: "search_factor".into(),
                        args: vec!["20".into()],
                    };
                    s.add_overlay(&node, o).map_err(err)?;
                }
            }
            if g.rng.random_bool(0.3) {
                s.wait().map_err(err)?;
            }
        }
        s.wait().map_err(err)?;
        let texts: Vec<(NodeName, String)> =
            s.latest().nodes.iter().map(|(k, v)| (k.clone(), v.text.to_string())).collect();
        let commands: usize = texts.iter().map(|(_, t)| line_starts(t).len().saturating_sub(1)).sum();
        ensure!(commands <= 60, "seed {seed}: script grew to {commands} lines");
        let interactive = s.dump_all(true);
        let batch = harness::batch_texts(&texts, &config, true).map_err(err)?;
        ensure!(interactive == batch, "seed {seed}: interactive and batch dumps differ\n{interactive}---\n{batch}");
    }
    Ok("100 random scripts, interactive dumps equal batch dumps".into())
}

// ---------------------------------------------------------------------------
// 3

fn gating() -> Outcome {
    let p = n("P.thy");
    let mut g = Gen::new(3_000);
    let text = g.theory("P", "", 14);
    let mut s = Session::in_process(&fast()).map_err(err)?;
    s.insert(&p, 0, &text).map_err(err)?;
    let mut rounds = 0;
    for _ in 0..10 {
        let ranges = g.ranges(text.len());
        s.set_perspective(&p, ranges, false).map_err(err)?;
        s.wait().map_err(err)?;
        let node = s.latest().node(&p).map_err(err)?.clone();
        let eligible: BTreeSet<usize> = node
            .spans
            .iter()
            .enumerate()
            .filter(|(_, sp)| sp.name == "eval" && node.perspective.covers(sp.content_range()))
            .map(|(i, _)| i)
            .collect();
        let live: BTreeSet<usize> = s.assignment().nodes[&p]
            .iter()
            .enumerate()
            .filter(|(_, ids)| ids[1..].iter().any(|id| s.state(*id) != TaskState::Cancelled))
            .map(|(i, _)| i)
            .collect();
        ensure!(eligible == live, "live prints {live:?} but eligible {eligible:?}");
        rounds += 1;
    }

    // with the default delay the prints are still waiting when the view shrinks
    let mut s = Session::in_process(&Config::default()).map_err(err)?;
    s.insert(&p, 0, &text).map_err(err)?;
    s.set_perspective(&p, vec![], true).map_err(err)?;
    s.sync().map_err(err)?;
    let prints: Vec<ExecId> = s.assignment().nodes[&p].iter().flat_map(|ids| ids[1..].to_vec()).collect();
    ensure!(!prints.is_empty(), "no prints with a full perspective");
    let t0 = Instant::now();
    s.set_perspective(&p, vec![], false).map_err(err)?;
    let ok = s
        .pump_until(Duration::from_secs(2), |s| prints.iter().all(|id| s.state(*id) == TaskState::Cancelled))
        .map_err(err)?;
    let elapsed = t0.elapsed();
    ensure!(ok, "prints not cancelled after the view shrank");
    ensure!(elapsed <= Duration::from_millis(200), "cancellation took {elapsed:?}");
    s.wait().map_err(err)?;
    Ok(format!("{rounds} perspectives matched; {} prints cancelled in {elapsed:?}", prints.len()))
}

// ---------------------------------------------------------------------------
// 4

fn miller_rabin(nv: &BigUint, bases: &[u32]) -> bool {
    let one = BigUint::from(1u32);
    let n1 = nv - &one;
    let mut d = n1.clone();
    let mut r = 0;
    while (&d % 2u32) == BigUint::from(0u32) {
        d >>= 1;
        r += 1;
    }
    'next: for &a in bases {
        let mut x = BigUint::from(a).modpow(&d, nv);
        if x == one || x == n1 {
            continue;
        }
        for _ in 1..r {
            x = (&x * &x) % nv;
            if x == n1 {
                continue 'next;
            }
        }
        return false;
    }
    true
}

fn cancellation() -> Outcome {
    const N: &str = "10000000000000000000000013";
    let nv: BigUint = N.parse().unwrap();
    let bases: Vec<u32> = vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];
    ensure!(miller_rabin(&nv, &bases), "{N} is not prime");

    let t = n("T.thy");
    let mut s = Session::in_process(&fast()).map_err(err)?;
    s.insert(&t, 0, &format!("theory T imports begin eval {N} end")).map_err(err)?;
    s.wait().map_err(err)?;
    let overlay =
        Overlay { command: 1, function: "search_factor".into(), args: vec!["1000000000000".into()] };
    let mut worst = Duration::ZERO;
    for trial in 0..10 {
        s.add_overlay(&t, overlay.clone()).map_err(err)?;
        s.sync().map_err(err)?;
        let id = s.last_print().ok_or("no print for the overlay")?;
        let running = s.pump_until(Duration::from_secs(10), |s| s.state(id) == TaskState::Running).map_err(err)?;
        ensure!(running, "trial {trial}: search never started");
        std::thread::sleep(Duration::from_millis(50));
        s.drain().map_err(err)?;
        ensure!(s.state(id) == TaskState::Running, "trial {trial}: search ended early as {:?}", s.state(id));
        let t0 = Instant::now();
        s.cancel(id).map_err(err)?;
        let done = s.pump_until(Duration::from_secs(2), |s| s.state(id) == TaskState::Cancelled).map_err(err)?;
        let elapsed = t0.elapsed();
        ensure!(done, "trial {trial}: not cancelled");
        ensure!(elapsed <= Duration::from_millis(100), "trial {trial}: cancellation took {elapsed:?}");
        worst = worst.max(elapsed);
        s.remove_overlay(&t, &overlay).map_err(err)?;
        s.wait().map_err(err)?;
    }
    Ok(format!("10 trials on prime {N}, worst latency {worst:?}"))
}

// ---------------------------------------------------------------------------
// 5

fn completion() -> Outcome {
    let t = n("T.thy");
    let text = "theory T imports begin\neval 1 ==>\ntext \"A ==> B\"\ncheck 1 : int\nend";
    let mut s = Session::in_process(&fast()).map_err(err)?;
    s.insert(&t, 0, text).map_err(err)?;
    s.wait().map_err(err)?;

    let term_caret = text.find("==>").unwrap() + 3;
    let (items, _) = s.complete(&t, term_caret).map_err(err)?;
    let arrow = items.iter().find(|i| i.replacement == "\\<Longrightarrow>");
    ensure!(arrow.is_some_and(|i| i.kind == ItemKind::Symbol), "no symbol item in term context: {items:?}");
    let doc_caret = text.rfind("==>").unwrap() + 3;
    let (items, _) = s.complete(&t, doc_caret).map_err(err)?;
    ensure!(items.iter().all(|i| i.kind != ItemKind::Symbol), "symbol items in prose: {items:?}");

    let colon = text.find(" : ").unwrap() + 1;
    for caret in [colon, colon + 1] {
        let (items, _) = s.complete(&t, caret).map_err(err)?;
        ensure!(items.is_empty(), "items at the check colon offset {caret}: {items:?}");
    }

    let text = "theory T imports begin def foo = 1 def foobar = 2 def bar = 3 eval foo_ end";
    let mut s = Session::in_process(&fast()).map_err(err)?;
    s.insert(&t, 0, text).map_err(err)?;
    s.wait().map_err(err)?;
    let (items, _) = s.complete(&t, text.find("foo_").unwrap() + 4).map_err(err)?;
    let semantic: Vec<&str> =
        items.iter().filter(|i| i.source == ItemSource::Semantic).map(|i| i.replacement.as_str()).collect();
    ensure!(semantic == ["foo", "foobar"], "semantic items {semantic:?}");

    let mut text = String::from("theory T imports begin");
    for i in 0..120 {
        text.push_str(&format!(" def c{i:03} = {i}"));
    }
    text.push_str(" eval __ end");
    let mut s = Session::in_process(&fast()).map_err(err)?;
    s.insert(&t, 0, &text).map_err(err)?;
    s.wait().map_err(err)?;
    let at = text.find("__").unwrap();
    let tree = s.markup(&t);
    let hits = tree.query(Range::new(at, at + 2), &["completion"]);
    let (_, elem) = hits.last().ok_or("no completion markup for __")?;
    let names = elem.get("names").unwrap_or("").split(',').filter(|x| !x.is_empty()).count();
    ensure!(names == 50, "{names} alternatives");
    ensure!(elem.get("truncated") == Some("true"), "alternatives not marked truncated");
    let (_, truncated) = s.complete(&t, at + 2).map_err(err)?;
    ensure!(truncated, "completion result not marked truncated");
    Ok("term/document contexts, zones, semantic items and the 50-name limit".into())
}

// ---------------------------------------------------------------------------
// 6

fn blob_bypass() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    std::fs::write(dir.path().join("a.defs"), "def a = 1\n").map_err(err)?;
    let config = Config { blob_dir: Some(dir.path().to_path_buf()), ..fast() };
    let l = n("L.thy");
    let mut s = Session::in_process(&config).map_err(err)?;
    s.set_blob(&l, "a.defs", "def a = 41\n").map_err(err)?;
    s.insert(&l, 0, "theory L imports begin load \"a.defs\" eval a + 1 end").map_err(err)?;
    s.wait().map_err(err)?;
    ensure!(s.fs_reads() == Some(0), "back-end read {:?} files", s.fs_reads());
    let dump = s.dump(&l, true);
    ensure!(dump.contains("result value=42"), "result does not use the editor copy:\n{dump}");

    // without the editor copy the file on disk is read
    let mut s = Session::in_process(&config).map_err(err)?;
    s.insert(&l, 0, "theory L imports begin load \"a.defs\" eval a + 1 end").map_err(err)?;
    s.wait().map_err(err)?;
    ensure!(s.fs_reads() == Some(1), "disk fallback read {:?} files", s.fs_reads());
    ensure!(s.dump(&l, true).contains("result value=2"), "disk fallback result");
    Ok("editor blob used with 0 file reads; disk read only without it".into())
}

// ---------------------------------------------------------------------------
// 7

fn sha(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

fn swap() -> Outcome {
    let big = n("Big.thy");
    let user = n("U.thy");
    let mut text = String::from("theory Big imports begin");
    for i in 0..200 {
        text.push_str(&format!(" def b{i} = {i} eval b{i} * 2"));
    }
    text.push_str(" end");
    let mut s = Session::in_process(&fast()).map_err(err)?;
    s.insert(&big, 0, &text).map_err(err)?;
    s.insert(&user, 0, "theory U imports Big begin end").map_err(err)?;
    s.set_perspective(&big, vec![], true).map_err(err)?;
    s.wait().map_err(err)?;
    let entries = s.entry_count(&big);
    ensure!(entries >= 500, "only {entries} markup entries");
    let before = sha(&s.dump(&big, false));

    s.set_visibility(&big, false).map_err(err)?;
    s.wait().map_err(err)?;
    ensure!(s.entry_count(&big) == 0, "{} entries kept while hidden", s.entry_count(&big));
    s.insert(&user, 27, "eval b199 + 1 ").map_err(err)?;
    s.wait().map_err(err)?;
    let u = s.dump(&user, true);
    ensure!(u.contains("result value=200"), "dependent eval while hidden:\n{u}");

    s.set_visibility(&big, true).map_err(err)?;
    s.wait().map_err(err)?;
    let after = sha(&s.dump(&big, false));
    ensure!(before == after, "dump changed across hide/show");
    Ok(format!("{entries} entries dropped and restored, dump hash {}", &before[..12]))
}

// ---------------------------------------------------------------------------
// 8

struct MsgGen(ChaCha8Rng);

impl MsgGen {
    fn string(&mut self) -> String {
        const PIECES: &[&str] = &["a", "Z", " ", "\"", "\\", "\n", "\t", "é", "⟹", "🦀", "{", "}", ":", ",", "\u{1}"];
        (0..self.0.random_range(0..12)).map(|_| PIECES[self.0.random_range(0..PIECES.len())]).collect()
    }

    fn node(&mut self) -> NodeName {
        const SEGS: &[&str] = &["A.thy", "lib", "x.defs", "Main.thy", "deep"];
        let k = self.0.random_range(1..4);
        let path: Vec<&str> = (0..k).map(|_| SEGS[self.0.random_range(0..SEGS.len())]).collect();
        n(&path.join("/"))
    }

    fn range(&mut self) -> Range {
        let a = self.0.random_range(0..1000);
        Range::new(a, a + self.0.random_range(0..50))
    }

    fn count(&mut self) -> usize {
        self.0.random_range(0..4)
    }

    fn edit(&mut self) -> NodeEdit {
        match self.0.random_range(0..5) {
            0 => NodeEdit::Text { edit: TextEdit::Insert { offset: self.0.random_range(0..500), text: self.string() } },
            1 => NodeEdit::Text { edit: TextEdit::Remove { offset: self.0.random_range(0..500), len: self.0.random_range(0..9) } },
            2 => NodeEdit::Header {
                header: NodeHeader {
                    imports: (0..self.count()).map(|_| self.node()).collect(),
                    errors: (0..self.count()).map(|_| self.string()).collect(),
                },
            },
            3 => NodeEdit::Perspective {
                perspective: Perspective {
                    visible: (0..self.count()).map(|_| self.range()).collect(),
                    overlays: (0..self.count())
                        .map(|_| Overlay {
                            command: self.0.random_range(0..40),
                            function: self.string(),
                            args: (0..self.count()).map(|_| self.string()).collect(),
                        })
                        .collect(),
                    required_full: self.0.random_bool(0.5),
                },
            },
            _ => NodeEdit::Blob {
                name: self.node(),
                blob: self.0.random_bool(0.7).then(|| Blob {
                    digest: sha(&self.string()),
                    content: self.string(),
                    editor_managed: self.0.random_bool(0.5),
                }),
            },
        }
    }

    fn message(&mut self) -> Message {
        const STATES: [TaskState; 6] = [
            TaskState::Pending,
            TaskState::Delayed,
            TaskState::Running,
            TaskState::Finished,
            TaskState::Cancelled,
            TaskState::FailedTimeout,
        ];
        const SEVERITIES: [OutputSeverity; 4] =
            [OutputSeverity::Result, OutputSeverity::Information, OutputSeverity::Warning, OutputSeverity::Error];
        let id = ExecId(self.0.random_range(0..u64::MAX / 2));
        match self.0.random_range(0..11) {
            0 => Message::Hello { protocol: self.0.random_range(0..5) },
            1 => Message::Update {
                parent_version: VersionId(self.0.random_range(0..100)),
                new_version: VersionId(self.0.random_range(0..100)),
                edits: (0..self.count()).map(|_| (self.node(), self.edit())).collect(),
            },
            2 => Message::Cancel { exec_id: id },
            3 => Message::RemoveVersions { ids: (0..self.count()).map(|i| VersionId(i as u64)).collect() },
            4 => Message::SetVisibility { node: self.node(), visible: self.0.random_bool(0.5) },
            5 => Message::RegisterDictionary { path: self.string() },
            6 => {
                let mut assignment = Assignment::default();
                for _ in 0..self.count() {
                    let cmds = (0..self.count()).map(|_| (0..self.count() + 1).map(|i| ExecId(i as u64)).collect()).collect();
                    assignment.nodes.insert(self.node(), cmds);
                }
                Message::Assign { version: VersionId(self.0.random_range(0..100)), assignment }
            }
            7 => Message::Report {
                exec_id: id,
                node: self.node(),
                entries: (0..self.count())
                    .map(|_| {
                        let mut elem = MarkupElem::new(self.string());
                        for _ in 0..self.count() {
                            elem = elem.with(self.string(), self.string());
                        }
                        MarkupEntry::new(self.range(), elem)
                    })
                    .collect(),
            },
            8 => Message::Output {
                exec_id: id,
                severity: SEVERITIES[self.0.random_range(0..4)],
                body: self.string(),
                sendback: self.0.random_bool(0.3).then(|| self.string()),
            },
            9 => Message::TaskState { exec_id: id, state: STATES[self.0.random_range(0..6)] },
            _ => Message::ProtocolError { text: self.string() },
        }
    }
}

fn protocol() -> Outcome {
    let mut g = MsgGen(ChaCha8Rng::seed_from_u64(8_000));
    for i in 0..1000 {
        let m = g.message();
        let line = encode(&m);
        ensure!(line.ends_with('\n') && line.matches('\n').count() == 1, "message {i} spans lines");
        let back = decode(&line).map_err(|e| format!("message {i}: {e:?}"))?;
        ensure!(back == m, "message {i} changed in round trip: {line}");
    }

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/scripts");
    let mut paths: Vec<_> = std::fs::read_dir(&dir).map_err(err)?.map(|e| e.unwrap().path()).collect();
    paths.sort();
    ensure!(paths.len() == 10, "{} fixture scripts", paths.len());
    let config = fast();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").map_err(err)?;
    let addr = listener.local_addr().map_err(err)?;
    let server_config = config.clone();
    let server = std::thread::spawn(move || harness::serve(listener, &server_config, Some(10)));
    let cwd = std::env::current_dir().map_err(err)?;
    std::env::set_current_dir(&dir).map_err(err)?;
    let mut result = Ok(());
    for path in &paths {
        let script = Script::parse(&std::fs::read_to_string(path).map_err(err)?).map_err(err)?;
        let mut a = Session::in_process(&config).map_err(err)?;
        harness::run(&mut a, &script, &mut std::io::sink()).map_err(err)?;
        let mut b = Session::connect(addr, &config).map_err(err)?;
        harness::run(&mut b, &script, &mut std::io::sink()).map_err(err)?;
        if a.log().canonical() != b.log().canonical() {
            result = Err(format!("{}: logs differ between transports", path.display()));
            break;
        }
    }
    std::env::set_current_dir(cwd).map_err(err)?;
    result?;
    server.join().map_err(|_| "server panicked")?.map_err(err)?;
    Ok("1000 random messages round-trip; 10 scripts log identically in process and over tcp".into())
}

// ---------------------------------------------------------------------------
// 9

fn hyperlinks() -> Outcome {
    let (a, b, c) = (n("A.thy"), n("B.thy"), n("C.thy"));
    let mut s = Session::in_process(&fast()).map_err(err)?;
    s.set_blob(&a, "a.defs", "def base = 10\ndef step = base + 1\n").map_err(err)?;
    s.insert(&a, 0, "theory A imports begin load \"a.defs\" def top = base * step end").map_err(err)?;
    s.insert(&b, 0, "theory B imports A begin def twice = top + base end").map_err(err)?;
    s.insert(&c, 0, "theory C imports A B begin eval twice * step check top : int end").map_err(err)?;
    s.wait().map_err(err)?;
    let mut resolved = 0;
    let mut into_blob = 0;
    for node in [&a, &b, &c] {
        let tree = s.markup(node);
        let text = s.text(node).unwrap().to_string();
        for (range, elem) in tree.iter() {
            if elem.name != "entity" || elem.get("role") != Some("ref") {
                continue;
            }
            let name = elem.get("name").unwrap_or("");
            let (target, def) = s
                .hyperlink(node, range.start)
                .map_err(err)?
                .ok_or_else(|| format!("{node} {range:?} ({name}) does not resolve"))?;
            let version = s.latest().clone();
            let target_text = version.source_text(&target).ok_or(format!("no text for {target}"))?;
            ensure!(def.slice(target_text) == name, "{node} {range:?} -> {target} {def:?} is not {name}");
            ensure!(range.slice(&text) == name, "reference text differs from its name");
            if target.to_string() == "a.defs" {
                into_blob += 1;
            }
            resolved += 1;
        }
    }
    ensure!(resolved >= 8 && into_blob >= 3, "only {resolved} references ({into_blob} into the blob)");
    Ok(format!("{resolved} references resolved, {into_blob} into the editor blob"))
}

// ---------------------------------------------------------------------------
// 10

fn spelling() -> Outcome {
    let prose = "This documnet is about how the prvoer can check each command of a theory, and why the editro will show the markpu for every theroem in the same view.";
    let expected = [
        ("documnet", "document"),
        ("prvoer", "prover"),
        ("editro", "editor"),
        ("markpu", "markup"),
        ("theroem", "theorem"),
    ];
    let dict_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/dictionary.txt");
    let dict = Dictionary::load(&dict_path).map_err(err)?;
    ensure!(dict.len() == Dictionary::builtin().len(), "builtin dictionary differs from its data file");

    let t = n("T.thy");
    let text = format!("theory T imports begin text \"{prose}\" end");
    let config = Config { dictionary: Some(dict_path), ..fast() };
    let mut s = Session::in_process(&config).map_err(err)?;
    s.insert(&t, 0, &text).map_err(err)?;
    s.wait().map_err(err)?;
    let tree = s.markup(&t);
    let findings: Vec<(Range, &MarkupElem)> = tree.iter().into_iter().filter(|(_, e)| e.name == "spell").collect();
    ensure!(findings.len() == expected.len(), "{} findings: {findings:?}", findings.len());
    for ((range, elem), (word, intended)) in findings.iter().zip(expected) {
        ensure!(range.slice(&text) == word, "finding {:?} is not {word}", range.slice(&text));
        let first = elem.get("suggestions").unwrap_or("").split(',').next().unwrap_or("");
        ensure!(first == intended, "{word}: first suggestion {first}");
    }
    Ok("5 misspellings found, each with the intended word first".into())
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("monotonicity", monotonicity),
        ("convergence", convergence),
        ("gating", gating),
        ("cancellation", cancellation),
        ("completion", completion),
        ("blob bypass", blob_bypass),
        ("swap", swap),
        ("protocol", protocol),
        ("hyperlinks", hyperlinks),
        ("spelling", spelling),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}; {secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail}; {secs:.1}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
