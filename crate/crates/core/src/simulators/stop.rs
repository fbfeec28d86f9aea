use serde::{Deserialize, Serialize};

use crate::model::SimulationState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopRule {
    pub max_steps: u64,
    pub target_saves: usize,
    pub frustration_limit: f64,
    /// New result pages tolerated without a new save.
    pub patience: u32,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { max_steps: 60, target_saves: 3, frustration_limit: 0.9, patience: 4 }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps < 1 {
            return Err("stop_rule.max_steps must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.frustration_limit) {
            return Err("stop_rule.frustration_limit must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Which clause of the rule fires, if any.
pub fn stop_reason(state: &SimulationState, rule: &StopRule) -> Option<&'static str> {
    if state.step >= rule.max_steps {
        Some("step budget reached")
    } else if state.saved_docs.len() >= rule.target_saves {
        Some("enough documents saved")
    } else if state.cognitive.peak_frustration >= rule.frustration_limit {
        Some("frustration limit reached")
    } else if state.cognitive.serps_since_last_save >= rule.patience {
        Some("patience exhausted")
    } else {
        None
    }
}

/// Frustration is judged by its peak so the rule stays monotone: once true
/// it remains true for successors without new saves.
pub fn decide_stop(state: &SimulationState, rule: &StopRule) -> bool {
    stop_reason(state, rule).is_some()
}
