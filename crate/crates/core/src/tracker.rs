//! Transparent action recording around a [`ClientSession`].
//!
//! Every completed perform emits exactly one [`ActionEvent`] into an
//! [`EventSink`]. Actions that were not available, or whose server request
//! failed, are not bindings and emit nothing. A failing sink never changes
//! what the client does.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::client::{ActionTemplate, ClientError, ClientSession, Completion, ViewState};
use crate::clock::Clock;
use crate::id::ComponentId;
use crate::server::{ApiError, Backend};
use crate::trace::{ActionEvent, ActionKind, KindTag, UiAction, View};

/// Destination for tracked events.
pub trait EventSink {
    type Error: fmt::Display;

    fn append(&mut self, event: &ActionEvent) -> Result<(), Self::Error>;
}

/// Keeps events in memory.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    pub events: Vec<ActionEvent>,
}

impl EventSink for MemorySink {
    type Error = core::convert::Infallible;

    fn append(&mut self, event: &ActionEvent) -> Result<(), Self::Error> {
        self.events.push(event.clone());
        Ok(())
    }
}

/// Drops events.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl EventSink for NullSink {
    type Error = core::convert::Infallible;

    fn append(&mut self, _: &ActionEvent) -> Result<(), Self::Error> {
        Ok(())
    }
}

impl<S: EventSink + ?Sized> EventSink for &mut S {
    type Error = S::Error;

    fn append(&mut self, event: &ActionEvent) -> Result<(), Self::Error> {
        (**self).append(event)
    }
}

#[derive(Debug, Error)]
pub enum TrackError {
    #[error(transparent)]
    Action(#[from] ClientError),
    /// The action completed but its event could not be written.
    #[error("tracking failed after the action completed: {message}")]
    Log { message: String, completion: Completion },
}

impl TrackError {
    /// The completion of the underlying action, when it ran.
    pub fn completion(&self) -> Option<&Completion> {
        match self {
            TrackError::Action(_) => None,
            TrackError::Log { completion, .. } => Some(completion),
        }
    }
}

/// A client session whose performs are recorded.
pub struct Tracker<S, C> {
    client: ClientSession,
    sink: S,
    clock: C,
    session: String,
    next_seq: u64,
}

impl<S: EventSink, C: Clock> Tracker<S, C> {
    /// Wraps a fresh session (`start_seq = 0`) or resumes one.
    pub fn wrap(client: ClientSession, sink: S, clock: C, session: impl Into<String>, start_seq: u64) -> Self {
        Self {
            client,
            sink,
            clock,
            session: session.into(),
            next_seq: start_seq,
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session
    }

    pub fn client(&self) -> &ClientSession {
        &self.client
    }

    pub fn state(&self) -> &ViewState {
        self.client.state()
    }

    pub fn observe_state(&self) -> View {
        self.client.observe_state()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn into_parts(self) -> (ClientSession, S) {
        (self.client, self.sink)
    }

    pub fn available_actions(&self) -> Vec<ActionTemplate> {
        self.client.available_actions()
    }

    pub fn active_ids(&self) -> Vec<ComponentId> {
        self.client.active_ids()
    }

    pub fn perform<B: Backend + ?Sized>(
        &mut self,
        action: &UiAction,
        backend: &mut B,
    ) -> Result<Completion, TrackError> {
        let before = self.client.observe_state();
        let completion = self.client.perform(action, backend)?;
        if completion.error().is_some() {
            return Ok(completion);
        }
        let event = ActionEvent {
            session: self.session.clone(),
            seq: self.next_seq,
            ts_ms: self.clock.now_ms(),
            state_before: before,
            action: action.clone(),
            state_after: self.client.observe_state(),
        };
        match self.sink.append(&event) {
            Ok(()) => {
                self.next_seq += 1;
                Ok(completion)
            }
            Err(e) => Err(TrackError::Log {
                message: alloc::format!("{e}"),
                completion,
            }),
        }
    }

    /// Performs the action named by `(component, kind, payload)` if it is active.
    pub fn trigger<B: Backend + ?Sized>(
        &mut self,
        component: &ComponentId,
        kind: KindTag,
        payload: Option<&str>,
        backend: &mut B,
    ) -> Result<Completion, TrackError> {
        let active = self.client.resolve(component, kind)?;
        let kind = match (active.kind, payload) {
            (KindTag::Click, None) => ActionKind::Click,
            (KindTag::TextInput, Some(p)) => ActionKind::TextInput(p.into()),
            (KindTag::TextInput, None) => {
                return Err(ClientError::MissingPayload { id: component.encode() }.into());
            }
            (KindTag::Click, Some(_)) => {
                return Err(ClientError::InvalidKind {
                    id: component.encode(),
                    expected: KindTag::Click,
                    got: KindTag::TextInput,
                }
                .into());
            }
        };
        let action = UiAction {
            component: component.clone(),
            kind,
        };
        self.perform(&action, backend)
    }

    /// Alert polling happens alongside actions and is not itself tracked.
    pub fn poll_alerts<B: Backend + ?Sized>(&mut self, backend: &mut B) -> Result<u32, ApiError> {
        self.client.poll_alerts(backend)
    }
}
