//! Expectation-maximization fitting of PBM and UBM from session logs.
//!
//! Sessions are reduced to click/skip counts keyed by (query, doc, rank) for
//! PBM and (query, doc, rank, distance bucket) for UBM. The counts are
//! order-free, so fitted parameters do not depend on session order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::clicks::{distance_bucket, AttractivenessMode, ClickModel, ClickModelParams};
use crate::logs::{SessionLog, TypedEvent};
use crate::num::Scalar;

pub const EM_TOLERANCE: f64 = 1e-6;
pub const EM_MAX_ITERATIONS: usize = 200;
const INITIAL: f64 = 0.5;
const LN_FLOOR: f64 = 1e-12;

/// Click probabilities depend only on products of examination and
/// attractiveness, so the fitted pair is defined up to a common scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Rescale so the most attractive document has attractiveness 1.
    #[default]
    MaxAttractiveness,
    /// Report the raw EM fixed point.
    None,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FitError {
    #[error("the logs contain no result impressions")]
    Empty,
    #[error("only PBM and UBM can be fitted")]
    NotFittable,
}

/// One examined-or-not result slot: query, doc, rank on the page and the
/// rank of the previous click on that page (0 before any click).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Impression {
    pub query: String,
    pub doc_id: String,
    pub rank: usize,
    pub last_click: usize,
    pub clicked: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImpressionSet {
    pub impressions: Vec<Impression>,
    /// Events that failed the schema or referenced ranks not shown.
    pub skipped_events: usize,
}

pub fn extract_impressions(logs: &[SessionLog]) -> ImpressionSet {
    let mut out = ImpressionSet::default();
    for session in logs {
        let mut serp: Option<(String, Vec<String>, BTreeSet<usize>)> = None;
        let flush = |serp: &mut Option<(String, Vec<String>, BTreeSet<usize>)>, out: &mut ImpressionSet| {
            if let Some((query, results, clicks)) = serp.take() {
                let mut last = 0;
                for (i, doc) in results.iter().enumerate() {
                    let rank = i + 1;
                    let clicked = clicks.contains(&rank);
                    out.impressions.push(Impression {
                        query: query.clone(),
                        doc_id: doc.clone(),
                        rank,
                        last_click: last,
                        clicked,
                    });
                    if clicked {
                        last = rank;
                    }
                }
            }
        };
        for event in &session.events {
            match event.typed() {
                Ok(TypedEvent::Query { query, results }) => {
                    flush(&mut serp, &mut out);
                    serp = Some((query, results, BTreeSet::new()));
                }
                Ok(TypedEvent::Click { rank, .. }) => match serp.as_mut() {
                    Some((_, results, clicks)) if rank <= results.len() => {
                        clicks.insert(rank);
                    }
                    _ => out.skipped_events += 1,
                },
                Ok(_) => {}
                Err(_) => out.skipped_events += 1,
            }
        }
        flush(&mut serp, &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FittedClickModel<T: Scalar = f64> {
    pub params: ClickModelParams<T>,
    /// query -> doc -> attractiveness.
    pub alpha: BTreeMap<String, BTreeMap<String, T>>,
    /// Log-likelihood of the initial parameters and after every iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub impressions: usize,
    pub skipped_events: usize,
}

/// (query, doc) pair and examination cell.
type Key = (String, String, usize, usize);

#[derive(Default, Clone, Copy)]
struct Counts {
    clicks: u64,
    skips: u64,
}

fn log_likelihood<T: Scalar>(
    stats: &BTreeMap<Key, Counts>,
    alpha: &BTreeMap<(String, String), T>,
    gamma: &BTreeMap<(usize, usize), T>,
) -> f64 {
    let mut ll = 0.0;
    for ((q, d, r, b), c) in stats {
        let p = (alpha[&(q.clone(), d.clone())] * gamma[&(*r, *b)]).as_f64();
        ll += c.clicks as f64 * p.max(LN_FLOOR).ln() + c.skips as f64 * (1.0 - p).max(LN_FLOOR).ln();
    }
    ll
}

pub fn fit_click_model<T: Scalar>(logs: &[SessionLog], model: ClickModel) -> Result<FittedClickModel<T>, FitError> {
    fit_impressions(&extract_impressions(logs), model, Normalization::default())
}

pub fn fit_impressions<T: Scalar>(
    set: &ImpressionSet,
    model: ClickModel,
    normalization: Normalization,
) -> Result<FittedClickModel<T>, FitError> {
    if model == ClickModel::Threshold {
        return Err(FitError::NotFittable);
    }
    if set.impressions.is_empty() {
        return Err(FitError::Empty);
    }
    let mut stats: BTreeMap<Key, Counts> = BTreeMap::new();
    for imp in &set.impressions {
        let bucket = match model {
            ClickModel::Ubm => distance_bucket(imp.rank - imp.last_click),
            _ => 0,
        };
        let c = stats.entry((imp.query.clone(), imp.doc_id.clone(), imp.rank, bucket)).or_default();
        if imp.clicked {
            c.clicks += 1;
        } else {
            c.skips += 1;
        }
    }

    let half = T::of(INITIAL);
    let mut alpha: BTreeMap<(String, String), T> =
        stats.keys().map(|(q, d, _, _)| ((q.clone(), d.clone()), half)).collect();
    let mut gamma: BTreeMap<(usize, usize), T> = stats.keys().map(|(_, _, r, b)| ((*r, *b), half)).collect();

    let mut trace = vec![log_likelihood(&stats, &alpha, &gamma)];
    let mut iterations = 0;
    while iterations < EM_MAX_ITERATIONS {
        let mut a_num: BTreeMap<(String, String), (T, T)> = BTreeMap::new();
        let mut g_num: BTreeMap<(usize, usize), (T, T)> = BTreeMap::new();
        for ((q, d, r, b), c) in &stats {
            let qd = (q.clone(), d.clone());
            let a = alpha[&qd];
            let g = gamma[&(*r, *b)];
            let denom = T::one() - a * g;
            let (post_a, post_g) = if denom > T::zero() {
                (a * (T::one() - g) / denom, g * (T::one() - a) / denom)
            } else {
                (T::zero(), T::zero())
            };
            let clicks = T::of(c.clicks as f64);
            let skips = T::of(c.skips as f64);
            let n = clicks + skips;
            let ea = a_num.entry(qd).or_insert((T::zero(), T::zero()));
            ea.0 = ea.0 + clicks + skips * post_a;
            ea.1 = ea.1 + n;
            let eg = g_num.entry((*r, *b)).or_insert((T::zero(), T::zero()));
            eg.0 = eg.0 + clicks + skips * post_g;
            eg.1 = eg.1 + n;
        }
        for (k, (num, den)) in a_num {
            alpha.insert(k, (num / den).clamp_to(T::zero(), T::one()));
        }
        for (k, (num, den)) in g_num {
            gamma.insert(k, (num / den).clamp_to(T::zero(), T::one()));
        }
        iterations += 1;
        let ll = log_likelihood(&stats, &alpha, &gamma);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(ll);
        if ll - prev < EM_TOLERANCE {
            break;
        }
    }

    if normalization == Normalization::MaxAttractiveness {
        let top = alpha.values().copied().fold(T::zero(), T::max);
        if top > T::zero() {
            for a in alpha.values_mut() {
                *a = *a / top;
            }
            for g in gamma.values_mut() {
                *g = *g * top;
            }
        }
    }

    let mut params = ClickModelParams::<T> {
        model,
        exam_pbm: BTreeMap::new(),
        exam_ubm: BTreeMap::new(),
        attractiveness_mode: AttractivenessMode::Judged,
    };
    for ((r, b), g) in gamma {
        match model {
            ClickModel::Ubm => {
                params.exam_ubm.entry(r).or_default().insert(b, g);
            }
            _ => {
                params.exam_pbm.insert(r, g);
            }
        }
    }
    let mut alpha_out: BTreeMap<String, BTreeMap<String, T>> = BTreeMap::new();
    for ((q, d), a) in alpha {
        alpha_out.entry(q).or_default().insert(d, a);
    }
    Ok(FittedClickModel {
        params,
        alpha: alpha_out,
        log_likelihood: trace,
        iterations,
        impressions: set.impressions.len(),
        skipped_events: set.skipped_events,
    })
}
