//! Turning logged sessions into labeled component decisions.

use super::features::extract_features;
use super::forest::LabeledDecision;
use crate::logs::{SessionLog, TypedEvent};
use crate::model::{
    apply_user_action, CognitiveParams, CognitiveState, InformationNeed, Persona, SimulationState, UserAction,
};
use crate::simulators::ids;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSessions {
    pub decisions: Vec<LabeledDecision>,
    /// Events that failed the schema or could not be replayed.
    pub skipped: usize,
}

/// Neutral starting state for a logged session; persona and need do not
/// enter the feature vector.
pub fn log_replay_state(task_id: &str) -> SimulationState {
    SimulationState {
        persona: Persona {
            persona_id: "logged".into(),
            patience_budget: 1,
            click_threshold: 0.0,
            reading_speed: 1.0,
            target_saves: 0,
        },
        need: InformationNeed {
            task_id: task_id.to_string(),
            description: "logged session".into(),
            need_terms: vec!["logged".into(), "session".into()],
        },
        history: Vec::new(),
        cognitive: CognitiveState::default(),
        step: 0,
        elapsed_seconds: 0.0,
        saved_docs: Vec::new(),
        rng_seed: 0,
        params: CognitiveParams::default(),
    }
}

/// Map a logged event to the action it replays as and the component
/// label it carries (saves carry none).
pub fn event_action(event: &TypedEvent, step: u64) -> (UserAction, Option<&'static str>) {
    match event {
        TypedEvent::Query { query, .. } => (UserAction::query(query, step), Some(ids::QUERY_GENERATION)),
        TypedEvent::Click { rank, doc_id } => (UserAction::click(*rank, doc_id, step), Some(ids::RELEVANCE_DECISION)),
        TypedEvent::Save { doc_id } => (UserAction::save(doc_id, step), None),
        TypedEvent::Stop => (UserAction::stop(step), Some(ids::STOPPING_DECISION)),
    }
}

/// Features are taken from the state reconstructed before each event; the
/// time between events is charged as the action's cost.
pub fn label_sessions(logs: &[SessionLog]) -> LabeledSessions {
    let mut out = LabeledSessions::default();
    for session in logs {
        let mut state = log_replay_state(&session.task_id);
        let mut last_t = 0.0_f64;
        for event in &session.events {
            let typed = match event.typed() {
                Ok(t) => t,
                Err(_) => {
                    out.skipped += 1;
                    continue;
                }
            };
            let (action, label) = event_action(&typed, state.step);
            let features = extract_features(&state);
            let cost = (event.t - last_t).max(0.0);
            match apply_user_action(&state, action, cost) {
                Ok(next) => {
                    if let Some(label) = label {
                        out.decisions.push(LabeledDecision { features, label: label.to_string() });
                    }
                    state = next;
                    last_t = last_t.max(event.t);
                }
                Err(_) => out.skipped += 1,
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logs::LogEvent;

    #[test]
    fn query_click_stop_labels() {
        let s = SessionLog {
            session_id: "s".into(),
            task_id: "t".into(),
            events: vec![
                LogEvent::query(0.0, "q", &["a", "b"]),
                LogEvent::click(3.0, 1, "a"),
                LogEvent::save(9.0, "a"),
                LogEvent::stop(12.0),
            ],
        };
        let out = label_sessions(&[s]);
        let labels: Vec<_> = out.decisions.iter().map(|d| d.label.as_str()).collect();
        assert_eq!(labels, ["QueryGeneration", "RelevanceDecision", "StoppingDecision"]);
        assert_eq!(out.decisions[2].features.get("docs_saved"), Some(1.0));
        assert_eq!(out.decisions[2].features.get("elapsed_seconds"), Some(9.0));
    }

    #[test]
    fn empty_session_gives_nothing() {
        let s = SessionLog { session_id: "s".into(), task_id: "t".into(), events: vec![] };
        assert_eq!(label_sessions(&[s]), LabeledSessions::default());
    }
}
