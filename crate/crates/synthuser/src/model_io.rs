//! Model files: JSON holding raw counts and provenance.
//!
//! Only counts are stored; probabilities are recomputed when the file is
//! loaded, so a model file can never hold rows that fail to normalize.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use synthuser_core::model::{ActionKey, FrequencyModel};
use synthuser_core::trace::{KindTag, View};
use synthuser_core::Trace;
use thiserror::Error;

pub const MODEL_FORMAT: &str = "synthuser-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Session ids of the traces the model was built from.
    pub sessions: Vec<String>,
    /// Trace files, as given on the command line.
    #[serde(default)]
    pub sources: Vec<String>,
    pub events: u64,
    /// Unix time in milliseconds.
    pub built_at_ms: i64,
}

impl Provenance {
    pub fn of(traces: &[Trace], sources: Vec<String>, built_at_ms: i64) -> Self {
        Self {
            sessions: traces.iter().map(|t| t.session.clone()).collect(),
            sources,
            events: traces.iter().map(|t| t.events.len() as u64).sum(),
            built_at_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionCount {
    pub state: View,
    pub component: String,
    pub kind: KindTag,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionCount {
    pub state: View,
    pub component: String,
    pub kind: KindTag,
    pub next: View,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub actions: Vec<ActionCount>,
    pub transitions: Vec<TransitionCount>,
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("model file: {0}")]
    Io(#[from] io::Error),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file: unsupported format `{format}` version {version}")]
    Format { format: String, version: u32 },
    #[error("model file: zero count for {0}")]
    ZeroCount(String),
}

impl ModelFile {
    pub fn from_model(model: &FrequencyModel, provenance: Provenance) -> Self {
        let actions = model
            .action_rows()
            .flat_map(|(state, row)| {
                row.counts().map(move |(key, count)| ActionCount {
                    state,
                    component: key.component.clone(),
                    kind: key.kind,
                    count,
                })
            })
            .collect();
        let transitions = model
            .transition_rows()
            .flat_map(|((state, key), row)| {
                row.counts().map(move |(next, count)| TransitionCount {
                    state,
                    component: key.component.clone(),
                    kind: key.kind,
                    next: *next,
                    count,
                })
            })
            .collect();
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            provenance,
            actions,
            transitions,
        }
    }

    pub fn to_model(&self) -> Result<FrequencyModel, ModelFileError> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(ModelFileError::Format {
                format: self.format.clone(),
                version: self.version,
            });
        }
        let key = |component: &str, kind| ActionKey {
            component: component.to_string(),
            kind,
        };
        if let Some(a) = self.actions.iter().find(|a| a.count == 0) {
            return Err(ModelFileError::ZeroCount(format!("{} in {}", a.component, a.state)));
        }
        if let Some(t) = self.transitions.iter().find(|t| t.count == 0) {
            return Err(ModelFileError::ZeroCount(format!("{} in {}", t.component, t.state)));
        }
        Ok(FrequencyModel::from_counts(
            self.actions
                .iter()
                .map(|a| (a.state, key(&a.component, a.kind), a.count)),
            self.transitions
                .iter()
                .map(|t| (t.state, key(&t.component, t.kind), t.next, t.count)),
        ))
    }
}

pub fn write_model(path: &Path, model: &FrequencyModel, provenance: Provenance) -> Result<(), ModelFileError> {
    let file = ModelFile::from_model(model, provenance);
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(FrequencyModel, Provenance), ModelFileError> {
    let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let model = file.to_model()?;
    Ok((model, file.provenance))
}
