//! TOML run configuration.
//!
//! ```toml
//! seed = 42                       # required for `play` unless --seed is given
//! max_steps = 500                 # global cap per agent
//! time_scale = 0.0                # 0 = unpaced
//! settle_ms = 0
//! stop_on_first_violation = false
//! fixture_users = 2               # pre-created `fixture-<k>` accounts
//! trace_out = "play-trace.jsonl"  # optional: record agent actions
//!
//! [faults]
//! follow_error_probability = 0.2
//! alert_nav_bug_enabled = false
//! alert_nav_bug_threshold = 10
//!
//! [stimulus]                      # optional scripted liker per agent
//! period = 1
//!
//! [[agents]]
//! kind = "frequency"              # replay | random | frequency
//! model = "model.json"            # or traces = ["a.jsonl", ...]
//! count = 1
//! max_steps = 500
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use synthuser_core::agents::AgentKind;
use synthuser_core::server::{DEFAULT_ALERT_NAV_BUG_THRESHOLD, DEFAULT_FOLLOW_ERROR_PROBABILITY};
use synthuser_core::FaultConfig;
use thiserror::Error;

use crate::engine::StimulusConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file: {0}")]
    Io(#[from] io::Error),
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid config value: {0}")]
    Invalid(String),
    #[error("a seed is required: set `seed` in the config or pass --seed")]
    MissingSeed,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFaults {
    #[serde(default = "default_probability")]
    follow_error_probability: f64,
    #[serde(default)]
    alert_nav_bug_enabled: bool,
    #[serde(default = "default_threshold")]
    alert_nav_bug_threshold: u32,
}

fn default_probability() -> f64 {
    DEFAULT_FOLLOW_ERROR_PROBABILITY
}

fn default_threshold() -> u32 {
    DEFAULT_ALERT_NAV_BUG_THRESHOLD
}

fn default_one() -> u32 {
    1
}

impl Default for RawFaults {
    fn default() -> Self {
        Self {
            follow_error_probability: default_probability(),
            alert_nav_bug_enabled: false,
            alert_nav_bug_threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStimulus {
    #[serde(default = "default_one")]
    period: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    kind: AgentKind,
    model: Option<PathBuf>,
    #[serde(default)]
    traces: Vec<PathBuf>,
    #[serde(default = "default_one")]
    count: u32,
    max_steps: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    max_steps: Option<u32>,
    #[serde(default)]
    time_scale: f64,
    #[serde(default)]
    settle_ms: u64,
    #[serde(default)]
    stop_on_first_violation: bool,
    #[serde(default)]
    fixture_users: u32,
    trace_out: Option<PathBuf>,
    #[serde(default)]
    faults: RawFaults,
    stimulus: Option<RawStimulus>,
    #[serde(default)]
    agents: Vec<RawAgent>,
}

/// Where an agent's behaviour comes from, before files are read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceRef {
    Random,
    Model(PathBuf),
    Traces(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentEntry {
    pub kind: AgentKind,
    pub source: SourceRef,
    pub count: u32,
    pub max_steps: Option<u32>,
}

/// Default step budget when neither the agent nor the config sets one.
pub const DEFAULT_MAX_STEPS: u32 = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct PlayConfig {
    pub seed: Option<u64>,
    pub faults: FaultConfig,
    pub time_scale: f64,
    pub max_steps: u32,
    pub settle_ms: u64,
    pub stop_on_first_violation: bool,
    pub fixture_users: u32,
    pub stimulus: Option<StimulusConfig>,
    pub agents: Vec<AgentEntry>,
    pub trace_out: Option<PathBuf>,
}

impl Default for PlayConfig {
    fn default() -> Self {
        Self {
            seed: None,
            faults: FaultConfig::default(),
            time_scale: 0.0,
            max_steps: DEFAULT_MAX_STEPS,
            settle_ms: 0,
            stop_on_first_violation: false,
            fixture_users: 0,
            stimulus: None,
            agents: Vec::new(),
            trace_out: None,
        }
    }
}

impl PlayConfig {
    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or(ConfigError::MissingSeed)
    }
}

const TOP_KEYS: &[&str] = &[
    "seed",
    "max_steps",
    "time_scale",
    "settle_ms",
    "stop_on_first_violation",
    "fixture_users",
    "trace_out",
    "faults",
    "stimulus",
    "agents",
];
const FAULT_KEYS: &[&str] = &[
    "follow_error_probability",
    "alert_nav_bug_enabled",
    "alert_nav_bug_threshold",
];
const STIMULUS_KEYS: &[&str] = &["period"];
const AGENT_KEYS: &[&str] = &["kind", "model", "traces", "count", "max_steps"];

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    fn scan(table: &toml::Table, known: &[&str], prefix: &str, out: &mut BTreeSet<String>) {
        for key in table.keys().filter(|k| !known.contains(&k.as_str())) {
            out.insert(format!("{prefix}{key}"));
        }
    }
    let mut out = BTreeSet::new();
    scan(table, TOP_KEYS, "", &mut out);
    if let Some(toml::Value::Table(t)) = table.get("faults") {
        scan(t, FAULT_KEYS, "faults.", &mut out);
    }
    if let Some(toml::Value::Table(t)) = table.get("stimulus") {
        scan(t, STIMULUS_KEYS, "stimulus.", &mut out);
    }
    if let Some(toml::Value::Array(agents)) = table.get("agents") {
        for (i, a) in agents.iter().enumerate() {
            if let toml::Value::Table(t) = a {
                scan(t, AGENT_KEYS, &format!("agents[{i}]."), &mut out);
            }
        }
    }
    out.into_iter().collect()
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Parses configuration text; relative paths are joined onto `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<PlayConfig, ConfigError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let unknown = unknown_keys(&table);
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    let raw: RawConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;

    let faults = FaultConfig {
        follow_error_probability: raw.faults.follow_error_probability,
        alert_nav_bug_enabled: raw.faults.alert_nav_bug_enabled,
        alert_nav_bug_threshold: raw.faults.alert_nav_bug_threshold,
    };
    faults.validate().map_err(|e| invalid(e.to_string()))?;
    if !(raw.time_scale.is_finite() && raw.time_scale >= 0.0) {
        return Err(invalid(format!("time_scale {} must be non-negative", raw.time_scale)));
    }
    if raw.max_steps == Some(0) {
        return Err(invalid("max_steps must be positive"));
    }
    if raw.stimulus.as_ref().is_some_and(|s| s.period == 0) {
        return Err(invalid("stimulus.period must be positive"));
    }
    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
    let mut agents = Vec::with_capacity(raw.agents.len());
    for (i, a) in raw.agents.into_iter().enumerate() {
        if a.count == 0 {
            return Err(invalid(format!("agents[{i}].count must be positive")));
        }
        if a.max_steps == Some(0) {
            return Err(invalid(format!("agents[{i}].max_steps must be positive")));
        }
        let source = match (a.kind, a.model, a.traces.is_empty()) {
            (AgentKind::Random, None, true) => SourceRef::Random,
            (AgentKind::Random, _, _) => {
                return Err(invalid(format!("agents[{i}]: a random agent takes no model or traces")))
            }
            (AgentKind::Frequency, Some(m), true) => SourceRef::Model(resolve(m)),
            (AgentKind::Replay, None, false) if a.traces.len() == 1 => {
                SourceRef::Traces(a.traces.into_iter().map(resolve).collect())
            }
            (AgentKind::Replay, _, _) => {
                return Err(invalid(format!(
                    "agents[{i}]: a replay agent takes exactly one trace file"
                )))
            }
            (AgentKind::Frequency, None, false) => SourceRef::Traces(a.traces.into_iter().map(resolve).collect()),
            (AgentKind::Frequency, _, _) => {
                return Err(invalid(format!(
                    "agents[{i}]: a frequency agent takes either `model` or `traces`"
                )))
            }
        };
        agents.push(AgentEntry {
            kind: a.kind,
            source,
            count: a.count,
            max_steps: a.max_steps,
        });
    }
    Ok(PlayConfig {
        seed: raw.seed,
        faults,
        time_scale: raw.time_scale,
        max_steps: raw.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
        settle_ms: raw.settle_ms,
        stop_on_first_violation: raw.stop_on_first_violation,
        fixture_users: raw.fixture_users,
        stimulus: raw.stimulus.map(|s| StimulusConfig { period: s.period }),
        agents,
        trace_out: raw.trace_out.map(resolve),
    })
}

pub fn parse_config(path: &Path) -> Result<PlayConfig, ConfigError> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}
