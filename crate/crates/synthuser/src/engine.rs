//! Running simulations: target creation, agent threads, pacing and the
//! shared trace log.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use synthuser_core::agents::{AgentSource, AgentSpec, Identity};
use synthuser_core::clock::VirtualClock;
use synthuser_core::play::{run_agent, AgentPlan, AgentReport, LikeStimulus, RunHooks, StepOutcome};
use synthuser_core::rng::{agent_seed, seeded, server_seed, SimRng};
use synthuser_core::server::{FaultConfigError, Response};
use synthuser_core::tracker::EventSink;
use synthuser_core::{ActionEvent, Backend, FaultConfig, LocalServer, NavFault, Request, SimulationReport};
use thiserror::Error;

use crate::trace_io::{AppendError, SharedTraceLog};

/// Virtual milliseconds between two tracked actions of one agent.
pub const VIRTUAL_STEP_MS: i64 = 1_000;

/// A backend behind a mutex, so many agents (or HTTP handlers) can share one
/// target; every request is served while holding the lock.
#[derive(Clone)]
pub struct SharedBackend {
    inner: Arc<Mutex<dyn Backend + Send>>,
}

impl SharedBackend {
    pub fn new<B: Backend + Send + 'static>(backend: B) -> Self {
        Self {
            inner: Arc::new(Mutex::new(backend)),
        }
    }

    pub fn with<T>(&self, f: impl FnOnce(&mut dyn Backend) -> T) -> T {
        let mut guard = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut *guard)
    }
}

impl Backend for SharedBackend {
    fn call(&mut self, request: Request) -> Response {
        self.with(|b| b.call(request))
    }
}

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("invalid fault settings: {0}")]
    Faults(#[from] FaultConfigError),
    #[error("could not create fixture account `{0}`: {1}")]
    Fixture(String, String),
}

/// Produces a fresh target for each run.
pub trait TargetFactory {
    fn create(&self, faults: &FaultConfig, master_seed: u64) -> Result<SharedBackend, TargetError>;
}

/// In-process demo target with a virtual clock, optionally pre-populated
/// with `fixture-<k>` accounts so that agents have someone to follow.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalTarget {
    pub fixture_users: u32,
}

pub type SimServer = LocalServer<SimRng, VirtualClock>;

impl LocalTarget {
    pub fn server(&self, faults: &FaultConfig, master_seed: u64) -> Result<SimServer, TargetError> {
        faults.validate()?;
        let mut server = LocalServer::new(seeded(server_seed(master_seed)), VirtualClock::default(), *faults);
        for k in 0..self.fixture_users {
            let username = format!("fixture-{k}");
            server
                .call(Request::Signup {
                    username: username.clone(),
                    password: format!("{username}-pw"),
                })
                .map_err(|e| TargetError::Fixture(username, e.to_string()))?;
        }
        Ok(server)
    }
}

impl TargetFactory for LocalTarget {
    fn create(&self, faults: &FaultConfig, master_seed: u64) -> Result<SharedBackend, TargetError> {
        Ok(SharedBackend::new(self.server(faults, master_seed)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StimulusConfig {
    /// Steps between two likes.
    pub period: u32,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub agents: Vec<AgentSpec>,
    pub faults: FaultConfig,
    /// 0 runs unpaced; 1 sleeps the recorded (or virtual) gap between steps.
    pub time_scale: f64,
    pub max_steps: u32,
    pub stop_on_first_violation: bool,
    pub master_seed: u64,
    /// Extra wait in the Await phase, in milliseconds.
    pub settle_ms: u64,
    /// One scripted liking account per agent, named `stimulus-<i>`.
    pub stimulus: Option<StimulusConfig>,
}

impl SimulationConfig {
    pub fn new(agents: Vec<AgentSpec>, master_seed: u64) -> Self {
        Self {
            agents,
            faults: FaultConfig::none(),
            time_scale: 0.0,
            max_steps: u32::MAX,
            stop_on_first_violation: false,
            master_seed,
            settle_ms: 0,
            stimulus: None,
        }
    }

    /// Agent specs as they will run: seeds derived from the master seed and
    /// step budgets capped by the global limit.
    pub fn resolved_agents(&self) -> Vec<AgentSpec> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, spec)| AgentSpec {
                seed: agent_seed(self.master_seed, i),
                max_steps: spec.max_steps.min(self.max_steps),
                ..spec.clone()
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("target startup failed: {0}")]
    Target(#[from] TargetError),
    #[error("time_scale must be a finite non-negative number")]
    TimeScale,
    #[error("agent thread panicked")]
    AgentPanic,
}

/// Sink used by the engine: either discard events or append to a shared log.
#[derive(Clone, Default)]
pub enum EngineSink {
    #[default]
    Discard,
    Log(SharedTraceLog),
}

impl EventSink for EngineSink {
    type Error = AppendError;

    fn append(&mut self, event: &ActionEvent) -> Result<(), AppendError> {
        match self {
            EngineSink::Discard => Ok(()),
            EngineSink::Log(log) => log.append(event),
        }
    }
}

struct EngineHooks {
    stimulus: Option<LikeStimulus>,
    pacing: Vec<Duration>,
    default_pace: Duration,
    settle: Duration,
    stop_on_violation: bool,
    stop: Arc<AtomicBool>,
}

impl RunHooks for EngineHooks {
    fn before_step(&mut self, agent: usize, step: u32, identity: &Identity, backend: &mut dyn Backend) {
        if let Some(s) = &mut self.stimulus {
            s.before_step(agent, step, identity, backend);
        }
    }

    fn after_step(&mut self, _agent: usize, outcome: &StepOutcome) -> bool {
        let pause = self.settle
            + self
                .pacing
                .get(outcome.step as usize)
                .copied()
                .unwrap_or(self.default_pace);
        if !pause.is_zero() {
            thread::sleep(pause);
        }
        if self.stop_on_violation && outcome.is_violation() {
            self.stop.store(true, Ordering::SeqCst);
        }
        true
    }

    fn stop_requested(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }
}

fn scaled(ms: i64, scale: f64) -> Duration {
    Duration::from_secs_f64((ms.max(0) as f64 * scale) / 1000.0)
}

fn hooks_for(config: &SimulationConfig, index: usize, spec: &AgentSpec, stop: &Arc<AtomicBool>) -> EngineHooks {
    let pacing = match &spec.source {
        AgentSource::Replay(trace) if config.time_scale > 0.0 => trace
            .events
            .windows(2)
            .map(|w| scaled(w[1].ts_ms - w[0].ts_ms, config.time_scale))
            .collect(),
        _ => Vec::new(),
    };
    EngineHooks {
        stimulus: config.stimulus.map(|s| {
            LikeStimulus::new(
                Identity {
                    username: format!("stimulus-{index}"),
                    password: format!("stimulus-{index}-pw"),
                },
                s.period,
            )
        }),
        pacing,
        default_pace: scaled(VIRTUAL_STEP_MS, config.time_scale),
        settle: Duration::from_millis(config.settle_ms),
        stop_on_violation: config.stop_on_first_violation,
        stop: stop.clone(),
    }
}

/// Runs every configured agent against one fresh target.
///
/// A single agent runs on the calling thread. Several agents each get their
/// own thread; the target serializes their requests.
pub fn run_simulation(
    config: &SimulationConfig,
    factory: &dyn TargetFactory,
    sink: EngineSink,
) -> Result<SimulationReport, RunError> {
    if !(config.time_scale.is_finite() && config.time_scale >= 0.0) {
        return Err(RunError::TimeScale);
    }
    let backend = factory.create(&config.faults, config.master_seed)?;
    let specs = config.resolved_agents();
    let stop = Arc::new(AtomicBool::new(false));
    let nav_fault = NavFault::from(&config.faults);

    let run_one = |index: usize, spec: &AgentSpec| -> AgentReport {
        let mut plan = AgentPlan::new(index, spec);
        plan.stop_on_violation = config.stop_on_first_violation;
        plan.nav_fault = nav_fault;
        let mut hooks = hooks_for(config, index, spec, &stop);
        let mut backend = backend.clone();
        run_agent(
            &plan,
            sink.clone(),
            VirtualClock::new(0, VIRTUAL_STEP_MS),
            &mut backend,
            &mut hooks,
        )
    };

    let reports = if specs.len() <= 1 {
        specs.iter().enumerate().map(|(i, s)| run_one(i, s)).collect()
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = specs
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let run_one = &run_one;
                    scope.spawn(move || run_one(i, s))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().map_err(|_| RunError::AgentPanic))
                .collect::<Result<Vec<_>, _>>()
        })?
    };
    Ok(SimulationReport::assemble(config.master_seed, config.faults, reports))
}
