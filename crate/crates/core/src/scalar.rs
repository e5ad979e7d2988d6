use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point element type used throughout the crate: `f32` or `f64`.
///
/// Statistical tables and p-value approximations are evaluated in `f64` and
/// converted back, so `f32` pipelines lose nothing beyond their own precision.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Relative tolerance used for rank-deficiency checks.
    fn rank_tolerance() -> Self {
        let eps = Self::epsilon() * Self::lit(64.0);
        eps.max(Self::lit(1e-10))
    }

    /// Converts an `f64` literal. Panics only if the type cannot represent it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn all_finite<T: Scalar>(xs: &[T]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

pub(crate) fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len())
}

/// Sample standard deviation (n - 1 denominator).
pub(crate) fn sample_std<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    (ss / T::from_usize_lossy(xs.len() - 1)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_floor_depends_on_precision() {
        assert_eq!(f64::rank_tolerance(), 1e-10);
        assert!(f32::rank_tolerance() > 1e-6);
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let s = sample_std(&[0.02_f64, 0.0]);
        assert!((s - 0.02 / 2f64.sqrt()).abs() < 1e-15);
    }
}
