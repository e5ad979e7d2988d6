use super::StatError;
use crate::scalar::{mean, Scalar};

/// Pearson product-moment correlation of two equal-length series.
pub fn pearson_correlation<T: Scalar>(x: &[T], y: &[T]) -> Result<T, StatError> {
    if x.len() != y.len() {
        return Err(StatError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatError::InsufficientData { needed: 2, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(StatError::UndefinedCorrelation("zero variance".into()));
    }
    let r = sxy / (sxx * syy).sqrt();
    if !r.is_finite() {
        return Err(StatError::NonFinite);
    }
    Ok(r.max(-T::one()).min(T::one()))
}
