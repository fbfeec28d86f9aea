//! State features shared by the rule and classifier policies.

use serde::{Deserialize, Serialize};

use crate::model::{ActionKind, SimulationState};

pub const FEATURE_DIM: usize = 13;

/// Names of the vector slots, in order.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "queries_issued",
    "elapsed_seconds",
    "step_index",
    "docs_saved",
    "clicks_total",
    "serps_since_last_click",
    "frustration_score",
    "last_action_query",
    "last_action_click",
    "last_action_read",
    "last_action_save",
    "last_action_back",
    "last_action_stop",
];

/// Extra cognitive fields rules may test; not part of the vector.
pub const COGNITIVE_FEATURES: [&str; 5] =
    ["satisfaction_estimate", "serps_since_last_save", "pages_since_last_click", "peak_frustration", "known_terms"];

const ONE_HOT_START: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn extract_features(state: &SimulationState) -> FeatureVector {
    let mut v = [0.0; FEATURE_DIM];
    v[0] = state.queries_issued() as f64;
    v[1] = state.elapsed_seconds;
    v[2] = state.step as f64;
    v[3] = state.docs_saved() as f64;
    v[4] = state.clicks_total() as f64;
    v[5] = f64::from(state.cognitive.serps_since_last_click);
    v[6] = state.cognitive.frustration_score;
    if let Some(last) = state.last_action() {
        v[ONE_HOT_START + last.kind().index()] = 1.0;
    }
    FeatureVector(v)
}

pub fn is_rule_feature(name: &str) -> bool {
    FEATURE_NAMES.contains(&name) || COGNITIVE_FEATURES.contains(&name)
}

/// Value of any name accepted by [`is_rule_feature`].
pub fn rule_feature(state: &SimulationState, features: &FeatureVector, name: &str) -> Option<f64> {
    if let Some(v) = features.get(name) {
        return Some(v);
    }
    let c = &state.cognitive;
    Some(match name {
        "satisfaction_estimate" => c.satisfaction_estimate,
        "serps_since_last_save" => f64::from(c.serps_since_last_save),
        "pages_since_last_click" => f64::from(c.pages_since_last_click),
        "peak_frustration" => c.peak_frustration,
        "known_terms" => c.known_terms.len() as f64,
        _ => return None,
    })
}

/// One-hot slot name for an action kind.
pub fn last_action_feature(kind: ActionKind) -> &'static str {
    FEATURE_NAMES[ONE_HOT_START + kind.index()]
}
