use std::io::Write;

use proptest::prelude::*;
use synthuser::core::trace::{IntegrityError, View};
use synthuser::core::{ActionEvent, ComponentId, Trace, UiAction};
use synthuser::trace_io::{load_trace_file, load_traces, write_traces, LoadError, TraceWriter};

fn like(i: u32) -> ComponentId {
    ComponentId::root("main")
        .child("list", Some("feed"), 0)
        .child("button", Some("Like"), i)
}

fn event(session: &str, seq: u64, before: View, after: View) -> ActionEvent {
    ActionEvent {
        session: session.into(),
        seq,
        ts_ms: 1_000 + seq as i64,
        state_before: before,
        action: UiAction::click(like(seq as u32 % 3)),
        state_after: after,
    }
}

fn file_of(events: &[ActionEvent]) -> Vec<u8> {
    let mut w = TraceWriter::new(Vec::new()).unwrap();
    for e in events {
        w.append(e).unwrap();
    }
    w.into_inner()
}

#[test]
fn four_lines_one_session() {
    let events: Vec<_> = (0..4).map(|s| event("s1", s, View::Feed, View::Feed)).collect();
    let traces = load_traces(&file_of(&events)[..]).unwrap();
    assert_eq!(traces.len(), 1);
    assert_eq!(traces[0].events, events);
}

#[test]
fn interleaved_sessions_are_grouped() {
    let events = vec![
        event("a", 0, View::Feed, View::Alerts),
        event("b", 0, View::Login, View::Signup),
        event("a", 1, View::Alerts, View::Feed),
        event("b", 1, View::Signup, View::Feed),
    ];
    let traces = load_traces(&file_of(&events)[..]).unwrap();
    let sessions: Vec<_> = traces.iter().map(|t| t.session.as_str()).collect();
    assert_eq!(sessions, ["a", "b"]);
    assert!(traces.iter().all(|t| t.events.iter().map(|e| e.seq).eq(0..2)));
}

fn raw_file(events: &[ActionEvent]) -> Vec<u8> {
    let mut out = b"{\"format\":\"synthuser-trace\",\"version\":1}\n".to_vec();
    for e in events {
        serde_json::to_writer(&mut out, e).unwrap();
        out.push(b'\n');
    }
    out
}

#[test]
fn gap_is_reported_after_the_last_contiguous_seq() {
    let events: Vec<_> = [0, 1, 3]
        .iter()
        .map(|&s| event("s", s, View::Feed, View::Feed))
        .collect();
    match load_traces(&raw_file(&events)[..]) {
        Err(LoadError::Integrity(IntegrityError::Gap { after, next, .. })) => {
            assert_eq!((after, next), (Some(1), 3));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn duplicates_are_reported() {
    let events: Vec<_> = [0, 1, 1]
        .iter()
        .map(|&s| event("s", s, View::Feed, View::Feed))
        .collect();
    assert!(matches!(
        load_traces(&raw_file(&events)[..]),
        Err(LoadError::Integrity(IntegrityError::Duplicate { seq: 1, line: 4, .. }))
    ));
}

#[test]
fn self_transitions_are_fine() {
    let e = event("s", 0, View::Feed, View::Feed);
    assert_eq!(
        load_traces(&file_of(std::slice::from_ref(&e))[..]).unwrap()[0].events[0],
        e
    );
}

#[test]
fn payloads_survive_and_text_input_requires_one() {
    let mut e = event("s", 0, View::Composer, View::Composer);
    e.action = UiAction::text_input(
        ComponentId::parse("window[main]#0/form[compose]#0/input[text]#0").unwrap(),
        "multi\nline \"quoted\" ✓",
    );
    let bytes = file_of(std::slice::from_ref(&e));
    assert_eq!(bytes.iter().filter(|b| **b == b'\n').count(), 2);
    assert_eq!(load_traces(&bytes[..]).unwrap()[0].events[0], e);

    let bad = String::from_utf8(raw_file(&[e]))
        .unwrap()
        .replace(",\"payload\":\"multi\\nline \\\"quoted\\\" ✓\"", "");
    assert!(matches!(
        load_traces(bad.as_bytes()),
        Err(LoadError::Parse { line: 2, .. })
    ));
}

#[test]
fn reopening_a_file_continues_its_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    {
        let mut w = TraceWriter::open_append(&path).unwrap();
        w.append(&event("a", 0, View::Feed, View::Feed)).unwrap();
        w.append(&event("a", 1, View::Feed, View::Feed)).unwrap();
    }
    let mut w = TraceWriter::open_append(&path).unwrap();
    assert_eq!(w.next_seq("a"), 2);
    assert!(w.append(&event("a", 0, View::Feed, View::Feed)).is_err());
    w.append(&event("a", 2, View::Feed, View::Feed)).unwrap();
    w.append(&event("b", 0, View::Feed, View::Feed)).unwrap();
    drop(w);
    let traces = load_trace_file(&path).unwrap();
    assert_eq!(traces[0].events.len(), 3);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.matches("synthuser-trace").count(), 1);
}

#[test]
fn torn_final_line_is_a_parse_error_but_the_prefix_loads() {
    let events: Vec<_> = (0..3).map(|s| event("s", s, View::Feed, View::Feed)).collect();
    let bytes = file_of(&events);
    let cut = bytes.len() - 10;
    assert!(matches!(
        load_traces(&bytes[..cut]),
        Err(LoadError::Parse { line: 4, .. })
    ));
    let last_newline = bytes[..cut].iter().rposition(|b| *b == b'\n').unwrap();
    let prefix = load_traces(&bytes[..=last_newline]).unwrap();
    assert_eq!(prefix[0].events.len(), 2);
}

fn arb_view() -> impl Strategy<Value = View> {
    prop::sample::select(View::ALL.to_vec())
}

fn arb_events() -> impl Strategy<Value = Vec<ActionEvent>> {
    prop::collection::vec(
        (
            0usize..3,
            arb_view(),
            arb_view(),
            0u32..4,
            prop::option::of("[a-z \\n\"]{0,8}"),
        ),
        0..40,
    )
    .prop_map(|raw| {
        let mut next = [0u64; 3];
        raw.into_iter()
            .map(|(s, before, after, idx, payload)| {
                let seq = next[s];
                next[s] += 1;
                let action = match payload {
                    Some(p) => UiAction::text_input(
                        ComponentId::root("main")
                            .child("form", Some("compose"), 0)
                            .child("input", Some("text"), idx),
                        p,
                    ),
                    None => UiAction::click(like(idx)),
                };
                ActionEvent {
                    session: format!("session/{s}"),
                    seq,
                    ts_ms: seq as i64 * 7,
                    state_before: before,
                    action,
                    state_after: after,
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn load_reproduces_appended_events(events in arb_events()) {
        let traces = load_traces(&file_of(&events)[..]).unwrap();
        let mut loaded: Vec<ActionEvent> = traces.into_iter().flat_map(|t| t.events).collect();
        let mut expected = events.clone();
        let key = |e: &ActionEvent| (e.session.clone(), e.seq);
        loaded.sort_by_key(key);
        expected.sort_by_key(key);
        prop_assert_eq!(loaded, expected);
    }

    #[test]
    fn every_complete_line_prefix_loads(events in arb_events()) {
        let bytes = file_of(&events);
        for (i, _) in bytes.iter().enumerate().filter(|(_, b)| **b == b'\n') {
            let traces = load_traces(&bytes[..=i]);
            prop_assert!(traces.is_ok(), "prefix ending at byte {} failed: {:?}", i, traces.err());
        }
    }

    #[test]
    fn write_traces_round_trips(events in arb_events()) {
        let traces: Vec<Trace> = load_traces(&file_of(&events)[..]).unwrap();
        let mut out = Vec::new();
        out = write_traces(out, &traces).unwrap();
        out.flush().unwrap();
        prop_assert_eq!(load_traces(&out[..]).unwrap(), traces);
    }
}
