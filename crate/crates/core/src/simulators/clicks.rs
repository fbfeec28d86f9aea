//! Click decisions on a result page: a snippet-overlap threshold rule and the
//! position-based and user-browsing click models.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iface::names;
use crate::iface::perceive::ListRecord;
use crate::model::SimulationState;
use crate::num::Scalar;
use crate::text::content_term_set;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClickModel {
    Pbm,
    Ubm,
    #[default]
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AttractivenessMode {
    #[default]
    Overlap,
    Judged,
}

/// Distances from the previous click beyond this share one bucket.
pub const UBM_MAX_DISTANCE: usize = 5;

/// Bucket for a rank distance: 1..=5 stay, anything larger maps to 6.
pub fn distance_bucket(distance: usize) -> usize {
    distance.min(UBM_MAX_DISTANCE + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClickModelParams<T: Scalar = f64> {
    pub model: ClickModel,
    /// rank -> examination probability.
    #[serde(default)]
    pub exam_pbm: BTreeMap<usize, T>,
    /// rank -> distance bucket -> examination probability.
    #[serde(default)]
    pub exam_ubm: BTreeMap<usize, BTreeMap<usize, T>>,
    #[serde(default)]
    pub attractiveness_mode: AttractivenessMode,
}

impl<T: Scalar> Default for ClickModelParams<T> {
    fn default() -> Self {
        ClickModelParams::threshold()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClickError {
    #[error("rank {0} is outside the examination table")]
    RankOutsideTable(usize),
    #[error("rank {rank} at distance bucket {bucket} is outside the examination table")]
    CellOutsideTable { rank: usize, bucket: usize },
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("the result list is empty")]
    NoResults,
}

impl<T: Scalar> ClickModelParams<T> {
    pub fn threshold() -> Self {
        ClickModelParams {
            model: ClickModel::Threshold,
            exam_pbm: BTreeMap::new(),
            exam_ubm: BTreeMap::new(),
            attractiveness_mode: AttractivenessMode::Overlap,
        }
    }

    /// PBM with the given examination probabilities for ranks 1, 2, ...
    pub fn pbm(gammas: &[T], mode: AttractivenessMode) -> Self {
        ClickModelParams {
            model: ClickModel::Pbm,
            exam_pbm: gammas.iter().enumerate().map(|(i, g)| (i + 1, *g)).collect(),
            exam_ubm: BTreeMap::new(),
            attractiveness_mode: mode,
        }
    }

    /// UBM whose examination is `gamma(rank, bucket)` for ranks 1..=page_size.
    pub fn ubm_from(page_size: usize, mode: AttractivenessMode, gamma: impl Fn(usize, usize) -> T) -> Self {
        let exam_ubm = (1..=page_size)
            .map(|r| (r, (1..=distance_bucket(r)).map(|b| (b, gamma(r, b))).collect()))
            .collect();
        ClickModelParams { model: ClickModel::Ubm, exam_pbm: BTreeMap::new(), exam_ubm, attractiveness_mode: mode }
    }

    pub fn validate(&self) -> Result<(), ClickError> {
        let ok = |p: &T| *p >= T::zero() && *p <= T::one();
        let bad = self
            .exam_pbm
            .values()
            .chain(self.exam_ubm.values().flat_map(|m| m.values()))
            .find(|p| !ok(p));
        match bad {
            Some(p) => Err(ClickError::BadProbability(p.as_f64())),
            None => Ok(()),
        }
    }

    pub fn gamma_pbm(&self, rank: usize) -> Result<T, ClickError> {
        self.exam_pbm.get(&rank).copied().ok_or(ClickError::RankOutsideTable(rank))
    }

    pub fn gamma_ubm(&self, rank: usize, last_click: usize) -> Result<T, ClickError> {
        let bucket = distance_bucket(rank - last_click);
        self.exam_ubm
            .get(&rank)
            .and_then(|m| m.get(&bucket))
            .copied()
            .ok_or(ClickError::CellOutsideTable { rank, bucket })
    }
}

pub fn jaccard<S: Ord>(a: &BTreeSet<S>, b: &BTreeSet<S>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Overlap attractiveness: share of need terms found in the snippet, capped at 1.
pub fn overlap_attractiveness(snippet: &str, need_terms: &[String]) -> f64 {
    if need_terms.is_empty() {
        return 0.0;
    }
    let terms = content_term_set(snippet);
    let hits = need_terms.iter().filter(|t| terms.contains(*t)).count();
    (hits as f64 / need_terms.len() as f64).min(1.0)
}

fn attractiveness(
    record: &ListRecord,
    state: &SimulationState,
    mode: AttractivenessMode,
    judged: &dyn Fn(&str) -> Option<u8>,
) -> f64 {
    let field = |f: &str| record.get(f).and_then(|v| v.as_deref()).unwrap_or("");
    match mode {
        AttractivenessMode::Judged => judged(field(names::F_DOC_ID)).map_or(0.0, |g| f64::from(g.min(3)) / 3.0),
        AttractivenessMode::Overlap => overlap_attractiveness(field(names::F_SNIPPET), &state.need.need_terms),
    }
}

/// Decide, top-down, which of the listed results are clicked. Ranks are
/// positions in `results` (1-based). One uniform draw is consumed per rank
/// for the probabilistic models, whatever the outcome.
pub fn decide_clicks<R: Rng + ?Sized>(
    results: &[ListRecord],
    state: &SimulationState,
    params: &ClickModelParams,
    judged: &dyn Fn(&str) -> Option<u8>,
    rng: &mut R,
) -> Result<Vec<(usize, bool)>, ClickError> {
    if results.is_empty() {
        return Err(ClickError::NoResults);
    }
    params.validate()?;
    let need: BTreeSet<String> = state.need.need_terms.iter().cloned().collect();
    let mut out = Vec::with_capacity(results.len());
    let mut last_click = 0;
    for (i, record) in results.iter().enumerate() {
        let rank = i + 1;
        let click = match params.model {
            ClickModel::Threshold => {
                let snippet = record.get(names::F_SNIPPET).and_then(|v| v.as_deref()).unwrap_or("");
                jaccard(&content_term_set(snippet), &need) >= state.persona.click_threshold
            }
            ClickModel::Pbm => {
                let p = params.gamma_pbm(rank)? * attractiveness(record, state, params.attractiveness_mode, judged);
                rng.gen::<f64>() < p
            }
            ClickModel::Ubm => {
                let p = params.gamma_ubm(rank, last_click)?
                    * attractiveness(record, state, params.attractiveness_mode, judged);
                rng.gen::<f64>() < p
            }
        };
        if click {
            last_click = rank;
        }
        out.push((rank, click));
    }
    Ok(out)
}
