//! Scalar abstraction for the numeric kernels (ranking, click models, metrics).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable by the scoring and estimation code: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Clamp into `[lo, hi]`.
    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        self.max(lo).min(hi)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn half<T: Scalar>() -> T {
        T::of(1.0) / T::of_usize(2)
    }

    #[test]
    fn conversions_work_for_both_widths() {
        assert_eq!(half::<f32>(), 0.5f32);
        assert_eq!(half::<f64>(), 0.5f64);
        assert_eq!(2.5f32.clamp_to(0.0, 1.0), 1.0);
        assert_eq!(f64::of(0.25).as_f64(), 0.25);
    }
}
