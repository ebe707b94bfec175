//! Core of the synthetic end-user testing framework: a demo social network
//! target, a formal client UI model, a transparent action tracker, agents
//! synthesized from traces, and the play loop that runs them.
//!
//! Everything here is deterministic given its seeds and works without `std`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agents;
pub mod client;
pub mod clock;
pub mod id;
pub mod model;
pub mod play;
pub mod rng;
pub mod server;
pub mod trace;
pub mod tracker;

pub use agents::{Agent, AgentKind, AgentSource, AgentSpec, Identity, Verdict, VerdictStatus};
pub use client::{ActionTemplate, ClientSession, NavFault, ViewState};
pub use id::ComponentId;
pub use model::{ActionKey, FrequencyModel};
pub use play::{SimulationReport, StepOutcome};
pub use server::{ApiError, Backend, FaultConfig, LocalServer, Reply, Request};
pub use trace::{ActionEvent, Trace, UiAction, View};
pub use tracker::{EventSink, Tracker};
