//! First-order behaviour model built by counting traces.
//!
//! Two tables: how often each action was taken in each view, and how often
//! each `(view, action)` pair led to each next view. Probabilities are plain
//! maximum-likelihood ratios `count / row total`; nothing is smoothed, so a
//! pair never seen in training has no expectation at all.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::ActionTemplate;
use crate::trace::{ActionEvent, KindTag, Trace, UiAction, View};

/// Model key for an action: the encoded component id (sibling indices kept)
/// and the kind. Ordering is lexicographic on the encoded id, then kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionKey {
    pub component: String,
    pub kind: KindTag,
}

impl ActionKey {
    pub fn of_action(action: &UiAction) -> Self {
        Self {
            component: action.component.encode(),
            kind: action.kind.tag(),
        }
    }

    pub fn of_template(t: &ActionTemplate) -> Self {
        Self {
            component: t.component.encode(),
            kind: t.kind,
        }
    }
}

impl core::fmt::Display for ActionKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} {}", self.kind, self.component)
    }
}

/// A frequency row: counts per outcome and their total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row<K: Ord> {
    counts: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord> Default for Row<K> {
    fn default() -> Self {
        Self {
            counts: BTreeMap::new(),
            total: 0,
        }
    }
}

impl<K: Ord + Clone> Row<K> {
    pub fn add(&mut self, key: K, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(key).or_insert(0) += n;
        self.total += n;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, key: &K) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn probability(&self, key: &K) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count(key) as f64 / self.total as f64
    }

    pub fn counts(&self) -> impl Iterator<Item = (&K, u64)> {
        self.counts.iter().map(|(k, c)| (k, *c))
    }

    pub fn distribution(&self) -> BTreeMap<K, f64> {
        self.counts.keys().map(|k| (k.clone(), self.probability(k))).collect()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("cannot build a model from an empty trace list")]
    NoTraces,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyModel {
    actions: BTreeMap<View, Row<ActionKey>>,
    transitions: BTreeMap<(View, ActionKey), Row<View>>,
}

impl FrequencyModel {
    pub fn build(traces: &[Trace]) -> Result<Self, ModelError> {
        if traces.is_empty() {
            return Err(ModelError::NoTraces);
        }
        let mut model = Self::default();
        for event in traces.iter().flat_map(|t| &t.events) {
            model.observe(event);
        }
        Ok(model)
    }

    pub fn observe(&mut self, event: &ActionEvent) {
        let key = ActionKey::of_action(&event.action);
        self.actions.entry(event.state_before).or_default().add(key.clone(), 1);
        self.transitions
            .entry((event.state_before, key))
            .or_default()
            .add(event.state_after, 1);
    }

    /// Rebuilds a model from raw counts; probabilities are recomputed.
    pub fn from_counts(
        actions: impl IntoIterator<Item = (View, ActionKey, u64)>,
        transitions: impl IntoIterator<Item = (View, ActionKey, View, u64)>,
    ) -> Self {
        let mut model = Self::default();
        for (state, key, n) in actions {
            if n > 0 {
                model.actions.entry(state).or_default().add(key, n);
            }
        }
        for (state, key, next, n) in transitions {
            if n > 0 {
                model.transitions.entry((state, key)).or_default().add(next, n);
            }
        }
        model
    }

    pub fn action_row(&self, state: View) -> Option<&Row<ActionKey>> {
        self.actions.get(&state)
    }

    pub fn transition_row(&self, state: View, key: &ActionKey) -> Option<&Row<View>> {
        self.transitions.get(&(state, key.clone()))
    }

    pub fn action_rows(&self) -> impl Iterator<Item = (View, &Row<ActionKey>)> {
        self.actions.iter().map(|(v, r)| (*v, r))
    }

    pub fn transition_rows(&self) -> impl Iterator<Item = ((View, &ActionKey), &Row<View>)> {
        self.transitions.iter().map(|((v, k), r)| ((*v, k), r))
    }

    /// Largest deviation of any non-empty row's probability sum from 1.
    pub fn normalization_error(&self) -> f64 {
        fn row_error<K: Ord + Clone>(row: &Row<K>) -> f64 {
            let sum: f64 = row.distribution().values().sum();
            (sum - 1.0).abs()
        }
        let a = self
            .actions
            .values()
            .filter(|r| r.total() > 0)
            .map(row_error)
            .fold(0.0, f64::max);
        let t = self
            .transitions
            .values()
            .filter(|r| r.total() > 0)
            .map(row_error)
            .fold(0.0, f64::max);
        a.max(t)
    }

    pub fn views(&self) -> Vec<View> {
        self.actions.keys().copied().collect()
    }
}
