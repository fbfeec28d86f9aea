mod common;

use proptest::prelude::*;

use searchsim_core::model::{
    apply_user_action, init_state, init_state_with, ActionBody, InformationNeed, Persona, SimulationState, UserAction,
};

fn persona() -> Persona {
    Persona { persona_id: "p".into(), patience_budget: 2, click_threshold: 0.4, reading_speed: 3.0, target_saves: 3 }
}

fn fresh() -> SimulationState {
    init_state(persona(), InformationNeed::from_description("t", "train ticket refund"), 1).unwrap()
}

#[derive(Debug, Clone)]
enum Step {
    Query(u8),
    NextPage,
    Click(u8),
    Read(u8),
    Save(u8),
    Back,
    Stop,
    Fail(u8),
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        4 => (0u8..6).prop_map(Step::Query),
        1 => Just(Step::NextPage),
        3 => (0u8..8).prop_map(Step::Click),
        2 => (0u8..8).prop_map(Step::Read),
        3 => (0u8..8).prop_map(Step::Save),
        1 => Just(Step::Back),
        1 => Just(Step::Stop),
        2 => (0u8..4).prop_map(Step::Fail),
    ]
}

fn action(s: &Step, at: u64) -> UserAction {
    let d = |i: &u8| format!("d{i}");
    match s {
        Step::Query(q) => UserAction::query(&format!("q{q}"), at),
        Step::NextPage => UserAction::new(ActionBody::Query { query: "q0".into(), page: 2 }, at),
        Step::Click(i) => UserAction::click(usize::from(*i) + 1, &d(i), at),
        Step::Read(i) => UserAction::read(&d(i), 12.0, at),
        Step::Save(i) => UserAction::save(&d(i), at),
        Step::Back => UserAction::back(at),
        Step::Stop => UserAction::stop(at),
        Step::Fail(i) => UserAction::save(&d(i), at).failed(),
    }
}

fn fold(steps: &[Step]) -> Vec<SimulationState> {
    let mut out = vec![fresh()];
    for s in steps {
        let cur = out.last().unwrap();
        match apply_user_action(cur, action(s, cur.step), 2.0) {
            Ok(next) => out.push(next),
            Err(_) => break,
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn cognitive_scores_stay_in_unit_interval(steps in prop::collection::vec(step(), 0..40)) {
        for s in fold(&steps) {
            let c = &s.cognitive;
            prop_assert!((0.0..=1.0).contains(&c.frustration_score));
            prop_assert!((0.0..=1.0).contains(&c.satisfaction_estimate));
            prop_assert!(c.peak_frustration >= c.frustration_score);
        }
    }
}

proptest! {
    #[test]
    fn saved_docs_follow_first_save_order(steps in prop::collection::vec(step(), 0..60)) {
        let last = fold(&steps).pop().unwrap();
        let mut first_saves: Vec<String> = Vec::new();
        for a in last.history.iter().filter(|a| !a.failed) {
            if let ActionBody::Save { doc_id } = &a.body {
                if !first_saves.contains(doc_id) {
                    first_saves.push(doc_id.clone());
                }
            }
        }
        prop_assert_eq!(&last.saved_docs, &first_saves);
    }

    #[test]
    fn nothing_applies_after_stop(steps in prop::collection::vec(step(), 0..40)) {
        let states = fold(&steps);
        let last = states.last().unwrap();
        if last.is_stopped() {
            prop_assert!(apply_user_action(last, UserAction::back(last.step), 1.0).is_err());
        }
        for (i, s) in states.iter().enumerate() {
            prop_assert_eq!(s.step as usize, i);
            prop_assert_eq!(s.history.len(), i);
        }
    }
}

/// Re-folding a run's action history reproduces every logged snapshot.
#[test]
fn history_fold_matches_logged_snapshots() {
    for name in ["oris-s-refine", "oris-a"] {
        let result = common::run(&common::config(name));
        let f = &result.final_state;
        let mut state = init_state_with(f.persona.clone(), f.need.clone(), f.rng_seed, f.params).unwrap();
        for (event, action) in result.trace.iter().zip(&result.final_state.history) {
            state = apply_user_action(&state, action.clone(), 1.0).unwrap();
            assert_eq!(state.snapshot(), event.state_snapshot, "{name} step {}", event.step);
        }
        assert_eq!(state.saved_docs, result.final_state.saved_docs);
    }
}
