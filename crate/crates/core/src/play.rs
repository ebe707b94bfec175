//! The Select → Perform → Await → Assert loop and report assembly.
//!
//! [`run_agent`] drives one agent to completion against any [`Backend`]
//! without threads; the std crate layers concurrency, pacing and file
//! output on top of it.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentKind, AgentSource, AgentSpec, Identity, SelectError, Verdict, VerdictStatus};
use crate::client::WINDOW_LABEL;
use crate::client::{ClientSession, NavFault};
use crate::clock::Clock;
use crate::id::ComponentId;
use crate::model::ActionKey;
use crate::rng::seeded;
use crate::server::{ApiError, Backend, FaultConfig, Reply, Request, TweetId};
use crate::trace::{KindTag, UiAction, View};
use crate::tracker::{EventSink, TrackError, Tracker};

/// One Select → Perform → Await → Assert cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: u32,
    pub state: View,
    pub action: UiAction,
    pub state_after: View,
    /// Absent when the request behind the action failed: nothing completed,
    /// so there is no transition to judge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub off_model: bool,
    /// A 5xx answer from the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_error: Option<ApiError>,
    /// A 4xx answer: the target refused the request as invalid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<ApiError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracking_error: Option<String>,
    /// Alerts delivered to this client so far, after the Await poll.
    pub alerts_seen: u32,
}

impl StepOutcome {
    pub fn is_violation(&self) -> bool {
        self.verdict.as_ref().is_some_and(Verdict::is_violation)
    }
}

/// Runs exactly one cycle: observe, select, trigger, poll alerts once,
/// observe again, assert.
pub fn step_agent<S: EventSink, C: Clock>(
    step: u32,
    agent: &mut dyn Agent,
    tracker: &mut Tracker<S, C>,
    backend: &mut dyn Backend,
    rng: &mut dyn RngCore,
) -> Result<StepOutcome, SelectError> {
    let state = tracker.observe_state();
    let available = tracker.available_actions();
    let selection = agent.select(state, &available, rng)?;
    let action = selection.action;

    let mut tracking_error = None;
    let completion = match tracker.perform(&action, backend) {
        Ok(c) => c,
        Err(TrackError::Log { message, completion }) => {
            tracking_error = Some(message);
            completion
        }
        Err(TrackError::Action(e)) => {
            return Err(SelectError::Unperformable {
                action: action.to_string(),
                message: e.to_string(),
            })
        }
    };
    let mut failure = completion.error().cloned();
    let poll = tracker.poll_alerts(backend);
    if let (None, Err(e)) = (&failure, poll) {
        failure = Some(e);
    }
    let state_after = tracker.observe_state();

    let verdict = match completion.error() {
        None => Some(agent.assert_transition(state, &action, state_after)),
        Some(_) => None,
    };
    let off_model = selection.off_model || verdict.as_ref().is_some_and(|v| v.status == VerdictStatus::OffModel);
    let (runtime_error, rejected) = match failure {
        Some(e) if e.is_internal() => (Some(e), None),
        Some(e) => (None, Some(e)),
        None => (None, None),
    };
    Ok(StepOutcome {
        step,
        state,
        action,
        state_after,
        verdict,
        off_model,
        runtime_error,
        rejected,
        tracking_error,
        alerts_seen: tracker.state().alert_count_seen,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapError {
    pub step: String,
    pub message: String,
}

impl core::fmt::Display for BootstrapError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "bootstrap failed at {}: {}", self.step, self.message)
    }
}

/// Creates the agent's account through the ordinary signup flow, as tracked
/// actions, leaving the session on the feed.
pub fn bootstrap<S: EventSink, C: Clock>(
    tracker: &mut Tracker<S, C>,
    backend: &mut dyn Backend,
    identity: &Identity,
) -> Result<(), BootstrapError> {
    let root = ComponentId::root(WINDOW_LABEL);
    let form = root.child("form", Some("signup"), 0);
    let steps: [(ComponentId, Option<&str>); 4] = [
        (
            root.child("form", Some("login"), 0).child("link", Some("signup"), 0),
            None,
        ),
        (form.child("input", Some("username"), 0), Some(&identity.username)),
        (form.child("input", Some("password"), 0), Some(&identity.password)),
        (form.child("button", Some("Sign up"), 0), None),
    ];
    for (id, payload) in steps {
        let kind = if payload.is_some() {
            KindTag::TextInput
        } else {
            KindTag::Click
        };
        let fail = |message: String| BootstrapError {
            step: id.encode(),
            message,
        };
        let completion = match tracker.trigger(&id, kind, payload, backend) {
            Ok(c) => c,
            Err(TrackError::Log { completion, .. }) => completion,
            Err(TrackError::Action(e)) => return Err(fail(e.to_string())),
        };
        if let Some(e) = completion.error() {
            return Err(fail(e.to_string()));
        }
    }
    Ok(())
}

/// Side activity the harness runs around each agent step.
pub trait RunHooks {
    /// Runs before each step's Select phase.
    fn before_step(&mut self, _agent: usize, _step: u32, _identity: &Identity, _backend: &mut dyn Backend) {}

    /// Returns `false` to stop the agent after this step.
    fn after_step(&mut self, _agent: usize, _outcome: &StepOutcome) -> bool {
        true
    }

    /// Polled before each step; `true` stops the agent.
    fn stop_requested(&self) -> bool {
        false
    }
}

/// Hooks that do nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHooks;

impl RunHooks for NoHooks {}

/// Scripted account that keeps liking the agent's newest tweet so the agent
/// receives a steady stream of `liked` alerts.
///
/// On its first call it signs up (or logs in) and follows the agent, which
/// also delivers one `followed` alert. Afterwards, every `period` steps, it
/// likes the agent's newest tweet, unliking first if needed. Until the agent
/// has posted something there is nothing to like.
#[derive(Debug, Clone)]
pub struct LikeStimulus {
    pub account: Identity,
    pub period: u32,
    token: Option<String>,
    following: Vec<String>,
    pub delivered_likes: u32,
}

impl LikeStimulus {
    pub fn new(account: Identity, period: u32) -> Self {
        Self {
            account,
            period: period.max(1),
            token: None,
            following: Vec::new(),
            delivered_likes: 0,
        }
    }

    fn session(&mut self, backend: &mut dyn Backend) -> Option<String> {
        if self.token.is_none() {
            let creds = (self.account.username.clone(), self.account.password.clone());
            let reply = backend
                .call(Request::Signup {
                    username: creds.0.clone(),
                    password: creds.1.clone(),
                })
                .or_else(|_| {
                    backend.call(Request::Login {
                        username: creds.0,
                        password: creds.1,
                    })
                });
            if let Ok(Reply::Session { token, .. }) = reply {
                self.token = Some(token);
            }
        }
        self.token.clone()
    }

    fn newest_tweet_of(backend: &mut dyn Backend, token: &str, author: &str) -> Option<(TweetId, bool)> {
        let Ok(Reply::Tweets { tweets }) = backend.call(Request::GetFeed { token: token.into() }) else {
            return None;
        };
        tweets
            .into_iter()
            .find(|t| t.author == author)
            .map(|t| (t.id, t.liked_by_me))
    }

    /// Delivers one like to `target`'s newest tweet, if it has one.
    pub fn poke(&mut self, target: &str, backend: &mut dyn Backend) -> bool {
        let Some(token) = self.session(backend) else {
            return false;
        };
        if !self.following.iter().any(|u| u == target) {
            let _ = backend.call(Request::Follow {
                token: token.clone(),
                username: target.into(),
            });
            // the follow fault may fire; retry on the next poke
            if let Ok(Reply::Users { users }) = backend.call(Request::ListUsers { token: token.clone() }) {
                if users
                    .iter()
                    .any(|u| u.username == target && u.followers.contains(&self.account.username))
                {
                    self.following.push(target.into());
                }
            }
        }
        let Some((tweet, liked)) = Self::newest_tweet_of(backend, &token, target) else {
            return false;
        };
        if liked {
            let _ = backend.call(Request::Unlike {
                token: token.clone(),
                tweet,
            });
        }
        let ok = backend.call(Request::Like { token, tweet }).is_ok();
        if ok {
            self.delivered_likes += 1;
        }
        ok
    }
}

impl RunHooks for LikeStimulus {
    fn before_step(&mut self, _agent: usize, step: u32, identity: &Identity, backend: &mut dyn Backend) {
        if step.is_multiple_of(self.period) {
            self.poke(&identity.username, backend);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AgentStatus {
    /// Ran the full step budget.
    MaxSteps,
    /// A replay agent consumed its whole trace.
    TraceComplete,
    /// Selection failed; the agent could not continue.
    Halted {
        error: SelectError,
    },
    StoppedOnViolation,
    /// Stopped from outside (another agent's violation, or a stop request).
    Stopped,
    BootstrapFailed {
        error: BootstrapError,
    },
}

impl AgentStatus {
    pub fn is_failure(&self) -> bool {
        matches!(self, AgentStatus::Halted { .. } | AgentStatus::BootstrapFailed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent: usize,
    pub kind: AgentKind,
    pub seed: u64,
    pub username: String,
    pub status: AgentStatus,
    /// Tracked signup actions performed before the first step.
    pub bootstrap_events: u64,
    pub steps: Vec<StepOutcome>,
    pub final_state: View,
}

/// How one agent is to be run.
#[derive(Debug, Clone)]
pub struct AgentPlan<'a> {
    pub index: usize,
    pub spec: &'a AgentSpec,
    pub max_steps: u32,
    pub stop_on_violation: bool,
    pub nav_fault: NavFault,
}

impl<'a> AgentPlan<'a> {
    pub fn new(index: usize, spec: &'a AgentSpec) -> Self {
        Self {
            index,
            spec,
            max_steps: spec.max_steps,
            stop_on_violation: false,
            nav_fault: NavFault::off(),
        }
    }

    /// Replay agents whose trace starts logged out bring their own signup.
    pub fn needs_bootstrap(&self) -> bool {
        match &self.spec.source {
            AgentSource::Replay(trace) => !matches!(trace.first_state(), Some(View::Login | View::Signup) | None),
            _ => true,
        }
    }
}

/// Drives one agent from bootstrap to its terminal status on the current
/// thread.
pub fn run_agent<S: EventSink, C: Clock>(
    plan: &AgentPlan<'_>,
    sink: S,
    clock: C,
    backend: &mut dyn Backend,
    hooks: &mut dyn RunHooks,
) -> AgentReport {
    let identity = Identity::for_agent(plan.index);
    let mut tracker = Tracker::wrap(
        ClientSession::new(plan.nav_fault),
        sink,
        clock,
        format!("agent-{}", plan.index),
        0,
    );
    let mut rng = seeded(plan.spec.seed);
    let mut agent: Box<dyn Agent + Send> = plan.spec.instantiate(identity.clone());
    let mut steps = Vec::new();

    let mut status = None;
    if plan.needs_bootstrap() {
        if let Err(error) = bootstrap(&mut tracker, backend, &identity) {
            status = Some(AgentStatus::BootstrapFailed { error });
        }
    }
    let bootstrap_events = tracker.next_seq();

    if status.is_none() {
        for step in 0..plan.max_steps {
            if hooks.stop_requested() {
                status = Some(AgentStatus::Stopped);
                break;
            }
            hooks.before_step(plan.index, step, &identity, backend);
            match step_agent(step, agent.as_mut(), &mut tracker, backend, &mut rng) {
                Err(SelectError::Exhausted) => {
                    status = Some(AgentStatus::TraceComplete);
                    break;
                }
                Err(error) => {
                    status = Some(AgentStatus::Halted { error });
                    break;
                }
                Ok(outcome) => {
                    let violation = outcome.is_violation();
                    let go_on = hooks.after_step(plan.index, &outcome);
                    steps.push(outcome);
                    if violation && plan.stop_on_violation {
                        status = Some(AgentStatus::StoppedOnViolation);
                        break;
                    }
                    if !go_on {
                        status = Some(AgentStatus::Stopped);
                        break;
                    }
                }
            }
        }
    }
    let status = status.unwrap_or(if agent.finished() {
        AgentStatus::TraceComplete
    } else {
        AgentStatus::MaxSteps
    });

    AgentReport {
        agent: plan.index,
        kind: plan.spec.kind(),
        seed: plan.spec.seed,
        username: identity.username,
        status,
        bootstrap_events,
        steps,
        final_state: tracker.observe_state(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub agent: usize,
    pub step: u32,
    pub state: View,
    pub action: UiAction,
    pub expected: BTreeMap<View, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_mode: Option<View>,
    pub observed: View,
    pub alerts_seen: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeErrorRecord {
    pub agent: usize,
    pub step: u32,
    pub state: View,
    pub action: UiAction,
    pub error: ApiError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub state: View,
    pub component: String,
    pub kind: KindTag,
    pub count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub agents: usize,
    pub steps: u64,
    pub violations: u64,
    pub off_model: u64,
    pub runtime_errors: u64,
    pub rejected: u64,
    pub tracking_errors: u64,
    pub failed_agents: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub master_seed: u64,
    pub faults: FaultConfig,
    pub agents: Vec<AgentReport>,
    pub violations: Vec<ViolationRecord>,
    pub runtime_errors: Vec<RuntimeErrorRecord>,
    pub coverage: Vec<CoverageEntry>,
    pub totals: Totals,
}

impl SimulationReport {
    /// Orders agents by index and derives violations, runtime errors,
    /// coverage and totals from the step lists.
    pub fn assemble(master_seed: u64, faults: FaultConfig, mut agents: Vec<AgentReport>) -> Self {
        agents.sort_by_key(|a| a.agent);
        for a in &mut agents {
            a.steps.sort_by_key(|s| s.step);
        }
        let mut violations = Vec::new();
        let mut runtime_errors = Vec::new();
        let mut coverage: BTreeMap<(View, ActionKey), u64> = BTreeMap::new();
        let mut totals = Totals {
            agents: agents.len(),
            ..Totals::default()
        };
        for a in &agents {
            if a.status.is_failure() {
                totals.failed_agents += 1;
            }
            for s in &a.steps {
                totals.steps += 1;
                *coverage.entry((s.state, ActionKey::of_action(&s.action))).or_insert(0) += 1;
                if s.off_model {
                    totals.off_model += 1;
                }
                if s.rejected.is_some() {
                    totals.rejected += 1;
                }
                if s.tracking_error.is_some() {
                    totals.tracking_errors += 1;
                }
                if let Some(v) = s.verdict.as_ref().filter(|v| v.is_violation()) {
                    totals.violations += 1;
                    violations.push(ViolationRecord {
                        agent: a.agent,
                        step: s.step,
                        state: s.state,
                        action: s.action.clone(),
                        expected: v.expected.clone(),
                        expected_mode: v.expected_mode(),
                        observed: v.observed,
                        alerts_seen: s.alerts_seen,
                    });
                }
                if let Some(e) = &s.runtime_error {
                    totals.runtime_errors += 1;
                    runtime_errors.push(RuntimeErrorRecord {
                        agent: a.agent,
                        step: s.step,
                        state: s.state,
                        action: s.action.clone(),
                        error: e.clone(),
                    });
                }
            }
        }
        let coverage = coverage
            .into_iter()
            .map(|((state, key), count)| CoverageEntry {
                state,
                component: key.component,
                kind: key.kind,
                count,
            })
            .collect();
        Self {
            master_seed,
            faults,
            agents,
            violations,
            runtime_errors,
            coverage,
            totals,
        }
    }

    /// Violations or runtime errors were found.
    pub fn has_findings(&self) -> bool {
        !self.violations.is_empty() || !self.runtime_errors.is_empty()
    }

    pub fn off_model_rate(&self) -> f64 {
        if self.totals.steps == 0 {
            0.0
        } else {
            self.totals.off_model as f64 / self.totals.steps as f64
        }
    }
}
