use std::io::Cursor;
use std::net::TcpListener;
use std::thread;

use proptest::prelude::*;

use super::*;
use crate::document::{Blob, NodeEdit, Overlay, Perspective, TextEdit};
use crate::markup::{MarkupElem, MarkupEntry};
use crate::range::Range;

#[test]
fn cancel_is_canonical() {
    let m = Message::Cancel { exec_id: ExecId(7) };
    assert_eq!(encode(&m), "{\"exec_id\":7,\"kind\":\"cancel\"}\n");
}

#[test]
fn decode_is_order_tolerant() {
    assert_eq!(decode("{\"kind\":\"cancel\",\"exec_id\":7}").unwrap(), Message::Cancel { exec_id: ExecId(7) });
}

#[test]
fn decode_errors() {
    assert!(decode("not json").unwrap_err().0.starts_with("malformed message"));
    assert_eq!(decode("{\"kind\":\"launch\"}").unwrap_err().0, "unknown kind: launch");
    assert!(decode("{\"exec_id\":1}").is_err());
    assert!(decode("{\"kind\":\"cancel\"}").unwrap_err().0.starts_with("malformed cancel"));
}

#[test]
fn truncated_line_at_eof() {
    let input = "{\"kind\":\"cancel\",\"exec_id\":1}\n{\"kind\":\"can";
    let mut got = Vec::new();
    read_messages(Cursor::new(input), |m| {
        got.push(m);
        true
    });
    assert_eq!(got.len(), 2);
    assert_eq!(got[0], Ok(Message::Cancel { exec_id: ExecId(1) }));
    assert_eq!(got[1], Err(DecodeError("unexpected eof".into())));
}

#[test]
fn newlines_in_strings_are_escaped() {
    let m = Message::Output {
        exec_id: ExecId(3),
        severity: OutputSeverity::Information,
        body: "two\nlines".into(),
        sendback: Some("eval 1".into()),
    };
    let line = encode(&m);
    assert_eq!(line.matches('\n').count(), 1);
    assert_eq!(decode(&line).unwrap(), m);
}

#[test]
fn tcp_handshake_and_exchange() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || {
        let mut be = accept(&listener).unwrap();
        let m = be.recv().unwrap().unwrap();
        be.send(&m).unwrap();
    });
    let mut fe = connect(addr).unwrap();
    let m = Message::RemoveVersions { ids: vec![VersionId(1), VersionId(2)] };
    fe.send(&m).unwrap();
    assert_eq!(fe.recv().unwrap().unwrap(), m);
    server.join().unwrap();
}

#[test]
fn tcp_version_mismatch_is_rejected() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let client = thread::spawn(move || {
        let mut s = std::net::TcpStream::connect(addr).unwrap();
        s.write_all(b"{\"kind\":\"hello\",\"protocol\":9}\n").unwrap();
        let mut lines = Vec::new();
        read_messages(BufReader::new(s), |m| {
            lines.push(m);
            true
        });
        lines
    });
    assert!(matches!(accept(&listener), Err(TransportError::Handshake(_))));
    let lines = client.join().unwrap();
    assert_eq!(lines[0], Ok(Message::hello()));
    assert!(matches!(&lines[1], Ok(Message::ProtocolError { text }) if text.contains("mismatch")));
}

use std::io::{BufReader, Write};

fn node_name() -> impl Strategy<Value = NodeName> {
    "[A-Z][a-z]{0,4}(\\.thy|\\.defs)".prop_map(|s| NodeName::new(&s).unwrap())
}

fn text() -> impl Strategy<Value = String> {
    // Includes quotes, backslashes, newlines and non-ASCII.
    proptest::collection::vec(
        prop_oneof![Just("a"), Just(" "), Just("\""), Just("\\"), Just("\n"), Just("\u{27f9}"), Just("\\<in>"), Just("9")],
        0..12,
    )
    .prop_map(|v| v.concat())
}

fn range() -> impl Strategy<Value = Range> {
    (0usize..500, 0usize..50).prop_map(|(s, l)| Range::new(s, s + l))
}

fn node_edit() -> impl Strategy<Value = NodeEdit> {
    prop_oneof![
        (0usize..100, text()).prop_map(|(o, t)| NodeEdit::Text { edit: TextEdit::Insert { offset: o, text: t } }),
        (0usize..100, 0usize..20).prop_map(|(o, l)| NodeEdit::Text { edit: TextEdit::Remove { offset: o, len: l } }),
        proptest::collection::vec(node_name(), 0..3).prop_map(|imports| NodeEdit::Header {
            header: crate::document::NodeHeader { imports, errors: Vec::new() }
        }),
        (proptest::collection::vec(range(), 0..3), any::<bool>(), proptest::collection::vec(text(), 0..2)).prop_map(
            |(visible, full, args)| NodeEdit::Perspective {
                perspective: Perspective {
                    visible,
                    overlays: vec![Overlay { command: 1, function: "search_factor".into(), args }],
                    required_full: full,
                }
            }
        ),
        (node_name(), proptest::option::of(text())).prop_map(|(name, content)| NodeEdit::Blob {
            name,
            blob: content.map(|c| Blob::new(c, true)),
        }),
    ]
}

fn entry() -> impl Strategy<Value = MarkupEntry> {
    (range(), "[a-z_]{1,8}", proptest::collection::vec(("[a-z-]{1,6}", text()), 0..3)).prop_map(|(r, name, props)| {
        let mut e = MarkupElem::new(name);
        for (k, v) in props {
            e = e.with(k, v);
        }
        MarkupEntry::new(r, e)
    })
}

fn task_state() -> impl Strategy<Value = TaskState> {
    prop_oneof![
        Just(TaskState::Pending),
        Just(TaskState::Delayed),
        Just(TaskState::Running),
        Just(TaskState::Finished),
        Just(TaskState::Cancelled),
        Just(TaskState::FailedTimeout),
    ]
}

fn exec_id() -> impl Strategy<Value = ExecId> {
    any::<u64>().prop_map(ExecId)
}

fn version() -> impl Strategy<Value = VersionId> {
    any::<u64>().prop_map(VersionId)
}

pub(crate) fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        any::<u32>().prop_map(|protocol| Message::Hello { protocol }),
        (version(), version(), proptest::collection::vec((node_name(), node_edit()), 0..4)).prop_map(
            |(parent_version, new_version, edits)| Message::Update { parent_version, new_version, edits }
        ),
        exec_id().prop_map(|exec_id| Message::Cancel { exec_id }),
        proptest::collection::vec(version(), 0..4).prop_map(|ids| Message::RemoveVersions { ids }),
        (node_name(), any::<bool>()).prop_map(|(node, visible)| Message::SetVisibility { node, visible }),
        text().prop_map(|path| Message::RegisterDictionary { path }),
        (version(), proptest::collection::btree_map(node_name(), proptest::collection::vec(proptest::collection::vec(exec_id(), 1..3), 0..3), 0..3))
            .prop_map(|(version, nodes)| Message::Assign { version, assignment: Assignment { nodes } }),
        (exec_id(), node_name(), proptest::collection::vec(entry(), 0..4))
            .prop_map(|(exec_id, node, entries)| Message::Report { exec_id, node, entries }),
        (
            exec_id(),
            prop_oneof![
                Just(OutputSeverity::Result),
                Just(OutputSeverity::Information),
                Just(OutputSeverity::Warning),
                Just(OutputSeverity::Error)
            ],
            text(),
            proptest::option::of(text())
        )
            .prop_map(|(exec_id, severity, body, sendback)| Message::Output { exec_id, severity, body, sendback }),
        (exec_id(), task_state()).prop_map(|(exec_id, state)| Message::TaskState { exec_id, state }),
        text().prop_map(|text| Message::ProtocolError { text }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decode_inverts_encode(m in message()) {
        let line = encode(&m);
        prop_assert!(line.ends_with('\n'));
        prop_assert_eq!(line.matches('\n').count(), 1);
        let back = decode(&line).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(encode(&back), line);
    }
}
