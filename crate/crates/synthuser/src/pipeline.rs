//! Glue between files on disk and the engine: building models from trace
//! files and turning a parsed config into a runnable simulation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use synthuser_core::agents::{AgentKind, AgentSource, AgentSpec, SpecError};
use synthuser_core::{FrequencyModel, Trace};
use thiserror::Error;

use crate::config::{ConfigError, PlayConfig, SourceRef};
use crate::engine::{LocalTarget, SimulationConfig};
use crate::model_io::{read_model, write_model, ModelFileError, Provenance};
use crate::trace_io::{load_trace_file, LoadError};

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("{}: {source}", path.display())]
    Trace { path: PathBuf, source: LoadError },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: ModelFileError },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no agents configured: pass --model, --replay or --random, or add [[agents]] to the config")]
    NoAgents,
}

pub fn load_all_traces(paths: &[PathBuf]) -> Result<Vec<Trace>, SetupError> {
    let mut traces = Vec::new();
    for path in paths {
        let loaded = load_trace_file(path).map_err(|source| SetupError::Trace {
            path: path.clone(),
            source,
        })?;
        traces.extend(loaded);
    }
    Ok(traces)
}

/// Builds a model from trace files and writes it to `out`.
pub fn synthesize(inputs: &[PathBuf], out: &Path, built_at_ms: i64) -> Result<FrequencyModel, SetupError> {
    let traces = load_all_traces(inputs)?;
    let model = FrequencyModel::build(&traces).map_err(SpecError::from)?;
    let sources = inputs.iter().map(|p| p.display().to_string()).collect();
    write_model(out, &model, Provenance::of(&traces, sources, built_at_ms)).map_err(|source| SetupError::Model {
        path: out.to_path_buf(),
        source,
    })?;
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<Arc<FrequencyModel>, SetupError> {
    let (model, _) = read_model(path).map_err(|source| SetupError::Model {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Arc::new(model))
}

fn source_for(kind: AgentKind, source: &SourceRef) -> Result<AgentSource, SetupError> {
    Ok(match (kind, source) {
        (_, SourceRef::Random) => AgentSource::Random,
        (_, SourceRef::Model(path)) => AgentSource::Frequency(load_model(path)?),
        (AgentKind::Replay, SourceRef::Traces(paths)) => {
            let mut traces = load_all_traces(paths)?;
            if traces.len() != 1 {
                return Err(SpecError::ReplayTraceCount(traces.len()).into());
            }
            AgentSource::Replay(traces.remove(0))
        }
        (_, SourceRef::Traces(paths)) => {
            let traces = load_all_traces(paths)?;
            AgentSource::Frequency(Arc::new(FrequencyModel::build(&traces).map_err(SpecError::from)?))
        }
    })
}

/// Expands config agents (with their `count`) into specs and picks the
/// target. Seeds are placeholders here; the engine derives the real ones.
pub fn simulation_from(config: &PlayConfig, seed: u64) -> Result<(SimulationConfig, LocalTarget), SetupError> {
    let mut agents = Vec::new();
    for entry in &config.agents {
        let source = source_for(entry.kind, &entry.source)?;
        let steps = entry.max_steps.unwrap_or(config.max_steps);
        for _ in 0..entry.count {
            agents.push(AgentSpec::with(source.clone(), 0, steps)?);
        }
    }
    if agents.is_empty() {
        return Err(SetupError::NoAgents);
    }
    let sim = SimulationConfig {
        agents,
        faults: config.faults,
        time_scale: config.time_scale,
        max_steps: config.max_steps,
        stop_on_first_violation: config.stop_on_first_violation,
        master_seed: seed,
        settle_ms: config.settle_ms,
        stimulus: config.stimulus,
    };
    Ok((
        sim,
        LocalTarget {
            fixture_users: config.fixture_users,
        },
    ))
}
