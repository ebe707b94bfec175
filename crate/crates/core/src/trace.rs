//! Tracked user activity: views, actions and per-session event streams.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::id::ComponentId;

/// Value of the `format` field in a trace file header.
pub const TRACE_FORMAT: &str = "synthuser-trace";
/// Trace file version. Version 1 closes the action kinds to `click` and `text-input`.
pub const TRACE_VERSION: u32 = 1;

/// The page a user is on. This is the whole application state the agents see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Login,
    Signup,
    Users,
    Feed,
    Alerts,
    Composer,
    WhoLiked,
}

impl View {
    pub const ALL: [View; 7] = [
        View::Login,
        View::Signup,
        View::Users,
        View::Feed,
        View::Alerts,
        View::Composer,
        View::WhoLiked,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            View::Login => "login",
            View::Signup => "signup",
            View::Users => "users",
            View::Feed => "feed",
            View::Alerts => "alerts",
            View::Composer => "composer",
            View::WhoLiked => "who_liked",
        }
    }

    pub const fn requires_session(self) -> bool {
        !matches!(self, View::Login | View::Signup)
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown view `{0}`")]
pub struct UnknownView(pub String);

impl FromStr for View {
    type Err = UnknownView;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        View::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownView(s.to_string()))
    }
}

/// Action kind without its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KindTag {
    #[serde(rename = "click")]
    Click,
    #[serde(rename = "text-input")]
    TextInput,
}

impl KindTag {
    pub const fn as_str(self) -> &'static str {
        match self {
            KindTag::Click => "click",
            KindTag::TextInput => "text-input",
        }
    }
}

impl fmt::Display for KindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionKind {
    Click,
    TextInput(String),
}

impl ActionKind {
    pub fn tag(&self) -> KindTag {
        match self {
            ActionKind::Click => KindTag::Click,
            ActionKind::TextInput(_) => KindTag::TextInput,
        }
    }

    pub fn payload(&self) -> Option<&str> {
        match self {
            ActionKind::Click => None,
            ActionKind::TextInput(p) => Some(p),
        }
    }
}

/// A concrete user action: which component, and what was done to it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "ActionRecord", into = "ActionRecord")]
pub struct UiAction {
    pub component: ComponentId,
    pub kind: ActionKind,
}

impl UiAction {
    pub fn click(component: ComponentId) -> Self {
        Self {
            component,
            kind: ActionKind::Click,
        }
    }

    pub fn text_input(component: ComponentId, payload: impl Into<String>) -> Self {
        Self {
            component,
            kind: ActionKind::TextInput(payload.into()),
        }
    }
}

impl fmt::Display for UiAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.tag(), self.component)
    }
}

/// On-disk shape of an action: `{component, kind, payload?}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionRecord {
    component: ComponentId,
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload: Option<String>,
}

impl TryFrom<ActionRecord> for UiAction {
    type Error = &'static str;

    fn try_from(rec: ActionRecord) -> Result<Self, Self::Error> {
        let kind = match (rec.kind, rec.payload) {
            (KindTag::Click, None) => ActionKind::Click,
            (KindTag::Click, Some(_)) => return Err("click actions carry no payload"),
            (KindTag::TextInput, Some(p)) => ActionKind::TextInput(p),
            (KindTag::TextInput, None) => return Err("text-input actions require a payload"),
        };
        Ok(UiAction {
            component: rec.component,
            kind,
        })
    }
}

impl From<UiAction> for ActionRecord {
    fn from(action: UiAction) -> Self {
        let kind = action.kind.tag();
        let payload = match action.kind {
            ActionKind::Click => None,
            ActionKind::TextInput(p) => Some(p),
        };
        ActionRecord {
            component: action.component,
            kind,
            payload,
        }
    }
}

/// One tracked step: the binding of a state, an action and the resulting state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionEvent {
    pub session: String,
    pub seq: u64,
    pub ts_ms: i64,
    pub state_before: View,
    pub action: UiAction,
    pub state_after: View,
}

/// All events of one session, ordered by `seq`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub session: String,
    pub events: Vec<ActionEvent>,
}

impl Trace {
    pub fn last_state(&self) -> Option<View> {
        self.events.last().map(|e| e.state_after)
    }

    pub fn first_state(&self) -> Option<View> {
        self.events.first().map(|e| e.state_before)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("session `{session}`: expected seq {expected}, got {got}")]
    OutOfOrder { session: String, expected: u64, got: u64 },
}

/// Tracks the next expected `seq` per session for an append-only log.
#[derive(Debug, Clone, Default)]
pub struct SequenceGuard {
    next: BTreeMap<String, u64>,
}

impl SequenceGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn expected(&self, session: &str) -> u64 {
        self.next.get(session).copied().unwrap_or(0)
    }

    pub fn check(&self, event: &ActionEvent) -> Result<(), SequenceError> {
        let expected = self.expected(&event.session);
        if event.seq != expected {
            return Err(SequenceError::OutOfOrder {
                session: event.session.clone(),
                expected,
                got: event.seq,
            });
        }
        Ok(())
    }

    /// Marks `event` as written. Call only after `check` succeeded and the write landed.
    pub fn commit(&mut self, event: &ActionEvent) {
        self.next.insert(event.session.clone(), event.seq + 1);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("line {line}: duplicate seq {seq} in session `{session}`")]
    Duplicate { session: String, seq: u64, line: usize },
    #[error("session `{session}`: gap after seq {after:?} (next seq present is {next})")]
    Gap {
        session: String,
        /// Last contiguous seq, `None` when seq 0 is missing.
        after: Option<u64>,
        next: u64,
    },
    #[error("session `{session}`: timestamp decreases at seq {seq}")]
    TimeRegression { session: String, seq: u64 },
}

/// Groups parsed events into traces and validates the trace invariants.
///
/// Events are tagged with their source line so integrity errors can point back
/// into the file. Sessions come out in order of first appearance.
#[derive(Debug, Default)]
pub struct TraceAssembler {
    order: Vec<String>,
    sessions: BTreeMap<String, Vec<(usize, ActionEvent)>>,
}

impl TraceAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, line: usize, event: ActionEvent) {
        let entry = self.sessions.entry(event.session.clone()).or_insert_with(|| {
            self.order.push(event.session.clone());
            Vec::new()
        });
        entry.push((line, event));
    }

    pub fn finish(mut self) -> Result<Vec<Trace>, IntegrityError> {
        let mut traces = Vec::with_capacity(self.order.len());
        for session in self.order {
            let mut events = self.sessions.remove(&session).unwrap_or_default();
            events.sort_by_key(|(line, e)| (e.seq, *line));
            for pair in events.windows(2) {
                if pair[0].1.seq == pair[1].1.seq {
                    return Err(IntegrityError::Duplicate {
                        session,
                        seq: pair[1].1.seq,
                        line: pair[1].0,
                    });
                }
            }
            for (expected, (_, e)) in events.iter().enumerate() {
                if e.seq != expected as u64 {
                    return Err(IntegrityError::Gap {
                        session,
                        after: expected.checked_sub(1).map(|s| s as u64),
                        next: e.seq,
                    });
                }
            }
            for pair in events.windows(2) {
                if pair[1].1.ts_ms < pair[0].1.ts_ms {
                    return Err(IntegrityError::TimeRegression {
                        session,
                        seq: pair[1].1.seq,
                    });
                }
            }
            traces.push(Trace {
                session,
                events: events.into_iter().map(|(_, e)| e).collect(),
            });
        }
        Ok(traces)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ev(session: &str, seq: u64, before: View, after: View) -> ActionEvent {
        ActionEvent {
            session: session.into(),
            seq,
            ts_ms: seq as i64 * 10,
            state_before: before,
            action: UiAction::click(ComponentId::root("main").child("button", Some("Feed"), 0)),
            state_after: after,
        }
    }

    #[test]
    fn view_names_round_trip() {
        for v in View::ALL {
            assert_eq!(v.as_str().parse::<View>().unwrap(), v);
        }
        assert!("home".parse::<View>().is_err());
    }

    #[test]
    fn guard_enforces_sequence() {
        let mut guard = SequenceGuard::new();
        let first = ev("s1", 0, View::Feed, View::Feed);
        guard.check(&first).unwrap();
        guard.commit(&first);
        for seq in 1..4 {
            let e = ev("s1", seq, View::Feed, View::Feed);
            guard.check(&e).unwrap();
            guard.commit(&e);
        }
        let skip = ev("s1", 5, View::Feed, View::Feed);
        assert_eq!(
            guard.check(&skip),
            Err(SequenceError::OutOfOrder {
                session: "s1".into(),
                expected: 4,
                got: 5
            })
        );
        // other sessions are independent
        guard.check(&ev("s2", 0, View::Feed, View::Feed)).unwrap();
    }

    #[test]
    fn assembler_groups_interleaved_sessions() {
        let mut asm = TraceAssembler::new();
        asm.push(1, ev("a", 0, View::Feed, View::Users));
        asm.push(2, ev("b", 0, View::Feed, View::Feed));
        asm.push(3, ev("b", 1, View::Feed, View::Alerts));
        asm.push(4, ev("a", 1, View::Users, View::Users));
        let traces = asm.finish().unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].session, "a");
        assert_eq!(traces[1].events.iter().map(|e| e.seq).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn assembler_reports_gap_after_last_contiguous_seq() {
        let mut asm = TraceAssembler::new();
        for (line, seq) in [0u64, 1, 3].into_iter().enumerate() {
            asm.push(line + 1, ev("s", seq, View::Feed, View::Feed));
        }
        assert_eq!(
            asm.finish(),
            Err(IntegrityError::Gap {
                session: "s".into(),
                after: Some(1),
                next: 3
            })
        );
    }

    #[test]
    fn assembler_rejects_duplicates() {
        let mut asm = TraceAssembler::new();
        asm.push(1, ev("s", 0, View::Feed, View::Feed));
        asm.push(2, ev("s", 0, View::Feed, View::Feed));
        assert!(matches!(
            asm.finish(),
            Err(IntegrityError::Duplicate { seq: 0, line: 2, .. })
        ));
    }

    #[test]
    fn assembler_rejects_time_regression() {
        let mut asm = TraceAssembler::new();
        let mut late = ev("s", 1, View::Feed, View::Feed);
        late.ts_ms = -5;
        asm.push(1, ev("s", 0, View::Feed, View::Feed));
        asm.push(2, late);
        assert!(matches!(
            asm.finish(),
            Err(IntegrityError::TimeRegression { seq: 1, .. })
        ));
    }

    #[test]
    fn self_transition_is_a_legal_event() {
        let mut guard = SequenceGuard::new();
        let e = ev("s1", 0, View::Feed, View::Feed);
        assert!(guard.check(&e).is_ok());
        guard.commit(&e);
    }
}
