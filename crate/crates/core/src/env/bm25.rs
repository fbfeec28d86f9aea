//! Okapi BM25 term scoring.

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Bm25Params<T: Scalar = f64> {
    pub k1: T,
    pub b: T,
}

impl<T: Scalar> Default for Bm25Params<T> {
    fn default() -> Self {
        Bm25Params { k1: T::of(1.2), b: T::of(0.75) }
    }
}

/// `idf(df, N) = ln(1 + (N - df + 0.5) / (df + 0.5))`
pub fn idf<T: Scalar>(df: usize, n: usize) -> T {
    let half = T::of(0.5);
    (T::one() + (T::of_usize(n) - T::of_usize(df) + half) / (T::of_usize(df) + half)).ln()
}

/// Score of one query term in one document. Zero when `tf == 0`.
pub fn bm25_score<T: Scalar>(tf: u32, df: usize, n: usize, dl: u32, avgdl: T, params: Bm25Params<T>) -> T {
    if tf == 0 {
        return T::zero();
    }
    let tf = T::of(f64::from(tf));
    let length_ratio = if avgdl > T::zero() { T::of(f64::from(dl)) / avgdl } else { T::one() };
    let norm = params.k1 * (T::one() - params.b + params.b * length_ratio);
    idf::<T>(df, n) * tf * (params.k1 + T::one()) / (tf + norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_tf_scores_zero() {
        assert_eq!(bm25_score(0, 1, 2, 10, 10.0, Bm25Params::<f64>::default()), 0.0);
    }

    #[test]
    fn hand_evaluated_case() {
        // ln(1 + 1.5/1.5) * (1 * 2.2 / (1 + 1.2)) = ln 2
        let s: f64 = bm25_score(1, 1, 2, 7, 7.0, Bm25Params::default());
        assert!((s - std::f64::consts::LN_2).abs() < 1e-12);
        let s32: f32 = bm25_score(1, 1, 2, 7, 7.0, Bm25Params::default());
        assert!((s32 - std::f32::consts::LN_2).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn non_decreasing_in_tf(tf in 0u32..200, df in 1usize..50, extra in 0usize..200, dl in 0u32..500, avgdl in 1.0f64..300.0) {
            let n = df + extra;
            let p = Bm25Params::<f64>::default();
            prop_assert!(bm25_score(tf + 1, df, n, dl, avgdl, p) >= bm25_score(tf, df, n, dl, avgdl, p));
        }
    }
}
