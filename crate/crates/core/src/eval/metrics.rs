//! Session metrics: task success, nDCG, click F1 and query similarity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;
use crate::text::word_tokens;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("query similarity needs two non-empty queries")]
    EmptyQuery,
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSuccess {
    pub success: bool,
    /// Soft diagnostic; never used in place of `success`.
    pub jaccard: f64,
}

/// Success means the saved set equals the set of documents graded 1 or more.
/// Extra saves break equality.
pub fn task_success(saved: &BTreeSet<String>, grades: &BTreeMap<String, u8>) -> TaskSuccess {
    let relevant: BTreeSet<String> = grades.iter().filter(|(_, g)| **g >= 1).map(|(d, _)| d.clone()).collect();
    let union = saved.union(&relevant).count();
    let jaccard = if union == 0 { 1.0 } else { saved.intersection(&relevant).count() as f64 / union as f64 };
    TaskSuccess { success: *saved == relevant, jaccard }
}

fn gain<T: Scalar>(grade: u8) -> T {
    T::of(2f64.powi(i32::from(grade)) - 1.0)
}

fn discount<T: Scalar>(position: usize) -> T {
    T::of_usize(position + 1).log2()
}

/// DCG over saves in save order with gain 2^g - 1 and log2(i + 1) discount,
/// normalized by the ideal ordering of the judged grades. IDCG = 0 gives 0.
pub fn ndcg_at_k<T: Scalar>(saved_in_order: &[String], grades: &BTreeMap<String, u8>, k: usize) -> Result<T, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    let dcg: T = saved_in_order
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain::<T>(grades.get(d).copied().unwrap_or(0)) / discount::<T>(i + 1))
        .sum();
    let mut ideal: Vec<u8> = grades.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: T = ideal.iter().take(k).enumerate().map(|(i, g)| gain::<T>(*g) / discount::<T>(i + 1)).sum();
    if idcg <= T::zero() {
        return Ok(T::zero());
    }
    Ok((dcg / idcg).clamp_to(T::zero(), T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// A click is a (result page id, rank) pair.
pub type ClickKey = (String, usize);

/// Micro-averaged over pairs. Both empty counts as perfect agreement.
pub fn click_f1(predicted: &BTreeSet<ClickKey>, truth: &BTreeSet<ClickKey>) -> ClickScores {
    match (predicted.is_empty(), truth.is_empty()) {
        (true, true) => return ClickScores { precision: 1.0, recall: 1.0, f1: 1.0 },
        (true, false) | (false, true) => {
            let p = if predicted.is_empty() { 1.0 } else { 0.0 };
            let r = if truth.is_empty() { 1.0 } else { 0.0 };
            return ClickScores { precision: p, recall: r, f1: 0.0 };
        }
        _ => {}
    }
    let hits = predicted.intersection(truth).count() as f64;
    let precision = hits / predicted.len() as f64;
    let recall = hits / truth.len() as f64;
    let f1 = if hits == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    ClickScores { precision, recall, f1 }
}

/// Token similarity for query comparison.
pub trait Embedder: Send + Sync {
    /// Similarity in [0, 1] between two tokens.
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Identical tokens score 1, everything else 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactTokenEmbedder;

impl Embedder for ExactTokenEmbedder {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            1.0
        } else {
            0.0
        }
    }
}

/// Greedy token matching in the style of BERTScore: every token takes its
/// best match on the other side, precision and recall are the means, F1
/// combines them. With [`ExactTokenEmbedder`] this is token-level F1.
pub fn query_similarity(generated: &str, reference: &str, embedder: &dyn Embedder) -> Result<f64, MetricError> {
    let g = word_tokens(generated);
    let r = word_tokens(reference);
    if g.is_empty() || r.is_empty() {
        return Err(MetricError::EmptyQuery);
    }
    let best = |from: &[String], to: &[String]| -> f64 {
        from.iter().map(|a| to.iter().map(|b| embedder.similarity(a, b)).fold(0.0, f64::max)).sum::<f64>()
            / from.len() as f64
    };
    let p = best(&g, &r);
    let rc = best(&r, &g);
    Ok(if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) })
}
