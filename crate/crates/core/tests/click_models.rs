use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use searchsim_core::logs::{LogEvent, SessionLog};
use searchsim_core::model::{init_state, InformationNeed, Persona, SimulationState};
use searchsim_core::simulators::{decide_clicks, fit_click_model, AttractivenessMode, ClickModel, ClickModelParams};

const GAMMA: [f64; 10] = [0.9, 0.6, 0.3, 0.25, 0.2, 0.18, 0.15, 0.12, 0.1, 0.08];

fn state() -> SimulationState {
    let persona = Persona { persona_id: "p".into(), patience_budget: 3, click_threshold: 0.3, reading_speed: 4.0, target_saves: 3 };
    init_state(persona, InformationNeed::from_description("t", "train refund"), 0).unwrap()
}

fn records(n: usize) -> Vec<BTreeMap<String, Option<String>>> {
    (0..n).map(|i| [("doc_id".to_string(), Some(format!("d{i}")))].into_iter().collect()).collect()
}

fn synthetic_logs(sessions: usize, alpha: &[f64; 10], seed: u64) -> Vec<SessionLog> {
    let docs: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sessions)
        .map(|s| {
            let mut order: Vec<usize> = (0..10).collect();
            order.shuffle(&mut rng);
            let shown: Vec<&str> = order.iter().map(|&i| docs[i].as_str()).collect();
            let mut events = vec![LogEvent::query(0.0, "q", &shown)];
            for (r, &i) in order.iter().enumerate() {
                if rng.gen_bool(GAMMA[r]) && rng.gen_bool(alpha[i]) {
                    events.push(LogEvent::click(1.0 + r as f64, r + 1, &docs[i]));
                }
            }
            SessionLog { session_id: format!("s{s}"), task_id: "t".into(), events }
        })
        .collect()
}

/// PBM marginal click rate at rank r is gamma_r * alpha(d); 10^4 draws land
/// within 0.02 of it.
#[test]
fn pbm_click_rates_match_closed_form() {
    let grades: BTreeMap<String, u8> = (0..10).map(|i| (format!("d{i}"), (i % 4) as u8)).collect();
    let params = ClickModelParams::pbm(&GAMMA, AttractivenessMode::Judged);
    let judged = |d: &str| grades.get(d).copied();
    let res = records(10);
    let s = state();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 10_000;
    let mut counts = [0usize; 10];
    for _ in 0..n {
        for (rank, clicked) in decide_clicks(&res, &s, &params, &judged, &mut rng).unwrap() {
            counts[rank - 1] += usize::from(clicked);
        }
    }
    for r in 0..10 {
        let expected = GAMMA[r] * f64::from(grades[&format!("d{r}")]) / 3.0;
        let observed = counts[r] as f64 / n as f64;
        assert!((observed - expected).abs() <= 0.02, "rank {}: {observed} vs {expected}", r + 1);
    }
}

/// With ten times the acceptance sample the fit lands well inside 0.05.
#[test]
fn pbm_recovers_parameters_from_large_logs() {
    let alpha = [1.0, 0.8, 0.7, 0.6, 0.5, 0.4, 0.35, 0.3, 0.2, 0.15];
    let fit = fit_click_model::<f64>(&synthetic_logs(10_000, &alpha, 31), ClickModel::Pbm).unwrap();
    for (r, g) in GAMMA.iter().enumerate() {
        let got = fit.params.exam_pbm[&(r + 1)];
        assert!((got - g).abs() <= 0.05, "gamma_{}: {got} vs {g}", r + 1);
    }
    for (i, a) in alpha.iter().enumerate() {
        let got = fit.alpha["q"][&format!("d{i}")];
        assert!((got - a).abs() <= 0.05, "alpha d{i}: {got} vs {a}");
    }
}

#[test]
fn ubm_fit_has_monotone_likelihood() {
    let alpha = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05];
    let fit = fit_click_model::<f64>(&synthetic_logs(500, &alpha, 8), ClickModel::Ubm).unwrap();
    assert!(fit.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    assert!(!fit.params.exam_ubm.is_empty());
    assert!(fit_click_model::<f64>(&[], ClickModel::Ubm).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_ignores_session_order(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let alpha = [0.9, 0.7, 0.6, 0.5, 0.5, 0.4, 0.3, 0.3, 0.2, 0.1];
        let logs = synthetic_logs(60, &alpha, seed);
        let mut shuffled = logs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        for model in [ClickModel::Pbm, ClickModel::Ubm] {
            let a = fit_click_model::<f64>(&logs, model).unwrap();
            let b = fit_click_model::<f64>(&shuffled, model).unwrap();
            prop_assert_eq!(&a.params, &b.params);
            prop_assert_eq!(&a.alpha, &b.alpha);
        }
    }

    #[test]
    fn same_stream_same_clicks(seed in any::<u64>()) {
        let params = ClickModelParams::pbm(&GAMMA, AttractivenessMode::Judged);
        let res = records(10);
        let s = state();
        let a = decide_clicks(&res, &s, &params, &|_| Some(2), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = decide_clicks(&res, &s, &params, &|_| Some(2), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn single_precision_fit_tracks_double() {
    let alpha = [1.0, 0.8, 0.7, 0.6, 0.5, 0.4, 0.35, 0.3, 0.2, 0.15];
    let logs = synthetic_logs(1000, &alpha, 3);
    let wide: searchsim_core::FittedModel = fit_click_model(&logs, ClickModel::Pbm).unwrap();
    let narrow: searchsim_core::FittedModel32 = fit_click_model(&logs, ClickModel::Pbm).unwrap();
    for (r, g) in &wide.params.exam_pbm {
        assert!((f64::from(narrow.params.exam_pbm[r]) - g).abs() < 1e-3, "rank {r}");
    }
}
