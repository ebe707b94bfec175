//! Replay, random and frequency agents.
//!
//! An agent cycles Select → Perform → Await → Assert. This module owns the
//! Select and Assert halves; the play loop supplies Perform and Await.
//!
//! Candidate actions are always put in lexicographic order of their encoded
//! component id, then kind, before any random draw, so a seed picks the same
//! action on every platform.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::ActionTemplate;
use crate::model::{ActionKey, FrequencyModel, ModelError};
use crate::rng::{index_for, unit_draw};
use crate::trace::{ActionEvent, KindTag, Trace, UiAction, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Replay,
    Random,
    Frequency,
}

/// Account credentials an agent types into login and signup forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub username: String,
    pub password: String,
}

impl Identity {
    /// Play-engine account for agent `index`: `agent-<index>`.
    pub fn for_agent(index: usize) -> Self {
        Self {
            username: format!("agent-{index}"),
            password: format!("agent-{index}-pw"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Ok,
    Violation,
    OffModel,
}

/// Outcome of checking one transition against the agent's expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    /// `1 - P(observed)`; 1 for violations and off-model steps.
    pub surprise: f64,
    pub expected: BTreeMap<View, f64>,
    pub observed: View,
}

impl Verdict {
    pub fn ok_without_expectation(observed: View) -> Self {
        Self {
            status: VerdictStatus::Ok,
            surprise: 0.0,
            expected: BTreeMap::new(),
            observed,
        }
    }

    /// Judges `observed` against an expected distribution.
    pub fn against(expected: BTreeMap<View, f64>, observed: View) -> Self {
        let p = expected.get(&observed).copied().unwrap_or(0.0);
        if p > 0.0 {
            Self {
                status: VerdictStatus::Ok,
                surprise: 1.0 - p,
                expected,
                observed,
            }
        } else {
            Self {
                status: VerdictStatus::Violation,
                surprise: 1.0,
                expected,
                observed,
            }
        }
    }

    pub fn off_model(observed: View) -> Self {
        Self {
            status: VerdictStatus::OffModel,
            surprise: 1.0,
            expected: BTreeMap::new(),
            observed,
        }
    }

    pub fn is_violation(&self) -> bool {
        self.status == VerdictStatus::Violation
    }

    /// Most likely expected view; ties go to the earlier view in catalog order.
    pub fn expected_mode(&self) -> Option<View> {
        let mut best: Option<(View, f64)> = None;
        for (v, p) in &self.expected {
            if best.is_none_or(|(_, bp)| *p > bp) {
                best = Some((*v, *p));
            }
        }
        best.map(|(v, _)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub action: UiAction,
    /// The choice fell back to uniform because the model had nothing usable.
    pub off_model: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum SelectError {
    #[error("replay diverged at seq {seq}: `{action}` is not available in {state}")]
    Divergence { seq: u64, action: String, state: View },
    #[error("no actions available in {state}")]
    DeadEnd { state: View },
    #[error("replay trace exhausted")]
    Exhausted,
    #[error("client refused `{action}`: {message}")]
    Unperformable { action: String, message: String },
}

pub trait Agent {
    fn kind(&self) -> AgentKind;

    fn select(
        &mut self,
        state: View,
        available: &[ActionTemplate],
        rng: &mut dyn RngCore,
    ) -> Result<Selection, SelectError>;

    fn assert_transition(&self, state: View, action: &UiAction, after: View) -> Verdict;

    /// True once the agent has nothing left to do on its own.
    fn finished(&self) -> bool {
        false
    }
}

/// Sorts templates lexicographically by encoded id, then kind.
pub fn ordered(available: &[ActionTemplate]) -> Vec<(ActionKey, &ActionTemplate)> {
    let mut keyed: Vec<_> = available.iter().map(|t| (ActionKey::of_template(t), t)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed
}

/// Cumulative-weight walk: the first entry whose running share exceeds `u`.
///
/// Shares are `count / total` of the given counts, so scaling every count by
/// the same factor yields bit-identical shares and the same pick.
pub fn weighted_pick(counts: &[u64], u: f64) -> Option<usize> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let mut cumulative = 0.0;
    let mut last = None;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        cumulative += c as f64 / total as f64;
        last = Some(i);
        if u < cumulative {
            return Some(i);
        }
    }
    last
}

/// Fills a text-input payload: the agent's own credentials for the login and
/// signup fields, generated text elsewhere.
pub fn fill_payload(template: &ActionTemplate, identity: &Identity, rng: &mut dyn RngCore) -> UiAction {
    match template.kind {
        KindTag::Click => UiAction::click(template.component.clone()),
        KindTag::TextInput => {
            let label = template.component.leaf().label.as_deref().unwrap_or("");
            let payload = match label {
                "username" => identity.username.clone(),
                "password" => identity.password.clone(),
                "media" => format!("media-{:04x}", rng.next_u32() & 0xffff),
                _ => format!("note {:04x}", rng.next_u32() & 0xffff),
            };
            UiAction::text_input(template.component.clone(), payload)
        }
    }
}

/// Re-executes a recorded trace step by step.
#[derive(Debug, Clone)]
pub struct ReplayAgent {
    events: Vec<ActionEvent>,
    cursor: usize,
}

impl ReplayAgent {
    pub fn new(trace: Trace) -> Self {
        Self {
            events: trace.events,
            cursor: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.events.len() - self.cursor
    }
}

impl Agent for ReplayAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Replay
    }

    fn select(
        &mut self,
        state: View,
        available: &[ActionTemplate],
        _rng: &mut dyn RngCore,
    ) -> Result<Selection, SelectError> {
        let Some(next) = self.events.get(self.cursor) else {
            return Err(SelectError::Exhausted);
        };
        let wanted = ActionTemplate {
            component: next.action.component.clone(),
            kind: next.action.kind.tag(),
        };
        if !available.contains(&wanted) {
            return Err(SelectError::Divergence {
                seq: next.seq,
                action: format!("{}", next.action),
                state,
            });
        }
        self.cursor += 1;
        Ok(Selection {
            action: next.action.clone(),
            off_model: false,
        })
    }

    fn finished(&self) -> bool {
        self.remaining() == 0
    }

    fn assert_transition(&self, _state: View, _action: &UiAction, after: View) -> Verdict {
        match self.cursor.checked_sub(1).and_then(|i| self.events.get(i)) {
            Some(logged) => Verdict::against(BTreeMap::from([(logged.state_after, 1.0)]), after),
            None => Verdict::off_model(after),
        }
    }
}

/// Uniform choice among available actions; holds no expectation.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    identity: Identity,
}

impl RandomAgent {
    pub fn new(identity: Identity) -> Self {
        Self { identity }
    }
}

fn uniform(
    state: View,
    available: &[ActionTemplate],
    identity: &Identity,
    rng: &mut dyn RngCore,
) -> Result<UiAction, SelectError> {
    if available.is_empty() {
        return Err(SelectError::DeadEnd { state });
    }
    let sorted = ordered(available);
    let i = index_for(unit_draw(rng), sorted.len());
    Ok(fill_payload(sorted[i].1, identity, rng))
}

impl Agent for RandomAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Random
    }

    fn select(
        &mut self,
        state: View,
        available: &[ActionTemplate],
        rng: &mut dyn RngCore,
    ) -> Result<Selection, SelectError> {
        Ok(Selection {
            action: uniform(state, available, &self.identity, rng)?,
            off_model: false,
        })
    }

    fn assert_transition(&self, _state: View, _action: &UiAction, after: View) -> Verdict {
        Verdict::ok_without_expectation(after)
    }
}

/// Samples actions with their observed frequency and expects next views
/// with their observed frequency.
#[derive(Debug, Clone)]
pub struct FrequencyAgent {
    model: Arc<FrequencyModel>,
    identity: Identity,
}

impl FrequencyAgent {
    pub fn new(model: Arc<FrequencyModel>, identity: Identity) -> Self {
        Self { model, identity }
    }

    pub fn model(&self) -> &FrequencyModel {
        &self.model
    }
}

impl Agent for FrequencyAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Frequency
    }

    fn select(
        &mut self,
        state: View,
        available: &[ActionTemplate],
        rng: &mut dyn RngCore,
    ) -> Result<Selection, SelectError> {
        if available.is_empty() {
            return Err(SelectError::DeadEnd { state });
        }
        let restricted: Vec<(&ActionTemplate, u64)> = match self.model.action_row(state) {
            Some(row) => ordered(available)
                .into_iter()
                .map(|(key, t)| (t, row.count(&key)))
                .filter(|(_, c)| *c > 0)
                .collect(),
            None => Vec::new(),
        };
        if restricted.is_empty() {
            return Ok(Selection {
                action: uniform(state, available, &self.identity, rng)?,
                off_model: true,
            });
        }
        let counts: Vec<u64> = restricted.iter().map(|(_, c)| *c).collect();
        let u = unit_draw(rng);
        // non-empty with positive counts, so a pick always exists
        let i = weighted_pick(&counts, u).unwrap_or(0);
        Ok(Selection {
            action: fill_payload(restricted[i].0, &self.identity, rng),
            off_model: false,
        })
    }

    fn assert_transition(&self, state: View, action: &UiAction, after: View) -> Verdict {
        match self.model.transition_row(state, &ActionKey::of_action(action)) {
            Some(row) if row.total() > 0 => Verdict::against(row.distribution(), after),
            _ => Verdict::off_model(after),
        }
    }
}

#[derive(Debug, Clone)]
pub enum AgentSource {
    Replay(Trace),
    Random,
    Frequency(Arc<FrequencyModel>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("a replay agent needs exactly one source trace, got {0}")]
    ReplayTraceCount(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("max_steps must be positive")]
    ZeroSteps,
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub source: AgentSource,
    pub seed: u64,
    pub max_steps: u32,
}

impl AgentSpec {
    pub fn replay(mut traces: Vec<Trace>, seed: u64, max_steps: u32) -> Result<Self, SpecError> {
        if traces.len() != 1 {
            return Err(SpecError::ReplayTraceCount(traces.len()));
        }
        Self::with(AgentSource::Replay(traces.remove(0)), seed, max_steps)
    }

    pub fn random(seed: u64, max_steps: u32) -> Result<Self, SpecError> {
        Self::with(AgentSource::Random, seed, max_steps)
    }

    pub fn frequency(traces: &[Trace], seed: u64, max_steps: u32) -> Result<Self, SpecError> {
        let model = FrequencyModel::build(traces)?;
        Self::with(AgentSource::Frequency(Arc::new(model)), seed, max_steps)
    }

    pub fn with(source: AgentSource, seed: u64, max_steps: u32) -> Result<Self, SpecError> {
        if max_steps == 0 {
            return Err(SpecError::ZeroSteps);
        }
        Ok(Self {
            source,
            seed,
            max_steps,
        })
    }

    pub fn kind(&self) -> AgentKind {
        match self.source {
            AgentSource::Replay(_) => AgentKind::Replay,
            AgentSource::Random => AgentKind::Random,
            AgentSource::Frequency(_) => AgentKind::Frequency,
        }
    }

    pub fn instantiate(&self, identity: Identity) -> Box<dyn Agent + Send> {
        match &self.source {
            AgentSource::Replay(trace) => Box::new(ReplayAgent::new(trace.clone())),
            AgentSource::Random => Box::new(RandomAgent::new(identity)),
            AgentSource::Frequency(model) => Box::new(FrequencyAgent::new(model.clone(), identity)),
        }
    }
}
