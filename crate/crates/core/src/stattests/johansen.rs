use serde::{Deserialize, Serialize};

use super::{Deterministic, StatError, Tables};
use crate::linalg::{cholesky, cholesky_solve, residualize, solve_lower, symmetric_eigenvalues, LinalgError, Matrix};
use crate::scalar::{all_finite, Scalar};

/// Minimum series length on top of the lag order.
const MIN_LENGTH: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohansenResult<T> {
    /// Squared canonical correlations, descending, each in [0, 1).
    pub eigenvalues: Vec<T>,
    /// Trace statistic for hypothesized rank r = 0..k−1.
    pub trace_stats: Vec<T>,
    pub critical_values_95: Vec<T>,
    pub p_values: Vec<T>,
    pub lag_order: usize,
    pub deterministic: Deterministic,
    /// Observations in the reduced-rank regression.
    pub n_obs: usize,
}

impl<T: Scalar> JohansenResult<T> {
    /// p-value of the rank-0 (no cointegration) hypothesis.
    pub fn rank0_p_value(&self) -> T {
        self.p_values[0]
    }

    pub fn rejects_rank0_at_95(&self) -> bool {
        self.trace_stats[0] > self.critical_values_95[0]
    }
}

fn singular(what: &str) -> impl Fn(LinalgError) -> StatError + '_ {
    move |e| StatError::SingularMomentMatrix(format!("{what}: {e}"))
}

/// Bivariate Johansen trace test with a restricted constant.
pub fn johansen_pairwise<T: Scalar>(y: &[T], x: &[T], lag_order: usize) -> Result<JohansenResult<T>, StatError> {
    johansen_pairwise_with(y, x, lag_order, Deterministic::RestrictedConstant)
}

/// Bivariate Johansen trace test of the VECM
/// `Δy_t = Φ y_{t−1} + Σ_{i=1..p} Γ_i Δy_{t−i} + ε_t`.
///
/// Δy_t and y_{t−1} are each regressed on the lagged differences; the squared
/// canonical correlations λ of the two residual sets give the trace statistic
/// `−n Σ_{i>r} ln(1 − λ_i)` for each hypothesized rank r.
pub fn johansen_pairwise_with<T: Scalar>(
    y: &[T],
    x: &[T],
    lag_order: usize,
    deterministic: Deterministic,
) -> Result<JohansenResult<T>, StatError> {
    if y.len() != x.len() {
        return Err(StatError::LengthMismatch(y.len(), x.len()));
    }
    if !all_finite(y) || !all_finite(x) {
        return Err(StatError::NonFinite);
    }
    let needed = MIN_LENGTH + lag_order;
    if y.len() < needed {
        return Err(StatError::InsufficientData { needed, got: y.len() });
    }
    let series = [y, x];
    let k = series.len();
    let len = y.len();
    let n = len - 1 - lag_order;
    let diff = |s: &[T], t: usize| s[t] - s[t - 1];

    // Rows correspond to t = lag_order + 1 .. len − 1.
    let first = lag_order + 1;
    let z0 = Matrix::from_fn(n, k, |i, j| diff(series[j], first + i));
    let restricted = deterministic == Deterministic::RestrictedConstant;
    let z1 = Matrix::from_fn(n, k + usize::from(restricted), |i, j| {
        if j < k {
            series[j][first + i - 1]
        } else {
            T::one()
        }
    });
    let unrestricted = deterministic == Deterministic::UnrestrictedConstant;
    let z2 = Matrix::from_fn(n, k * lag_order + usize::from(unrestricted), |i, c| {
        if c < k * lag_order {
            let (lag, j) = (c / k + 1, c % k);
            diff(series[j], first + i - lag)
        } else {
            T::one()
        }
    });

    let r0 = residualize(&z0, &z2).map_err(singular("lagged differences"))?;
    let r1 = residualize(&z1, &z2).map_err(singular("lagged differences"))?;
    let nf = T::from_usize_lossy(n);
    let s00 = r0.cross(&r0, nf)?;
    let s11 = r1.cross(&r1, nf)?;
    let s10 = r1.cross(&r0, nf)?;

    // Generalized symmetric problem |λ S11 − S10 S00⁻¹ S01| = 0 reduced with
    // S11 = L Lᵀ to the ordinary eigenproblem of L⁻¹ S10 S00⁻¹ S01 L⁻ᵀ.
    let l00 = cholesky(&s00).map_err(singular("S00"))?;
    let l11 = cholesky(&s11).map_err(singular("S11"))?;
    let a = s10.matmul(&cholesky_solve(&l00, &s10.transpose()))?;
    let b = solve_lower(&l11, &a);
    let c = solve_lower(&l11, &b.transpose());
    let mut eigenvalues = symmetric_eigenvalues(&c);
    eigenvalues.truncate(k);
    for ev in &mut eigenvalues {
        if *ev < T::zero() && *ev > -T::rank_tolerance() {
            *ev = T::zero();
        }
    }
    if eigenvalues.iter().any(|&ev| !(ev >= T::zero() && ev < T::one())) {
        return Err(StatError::SingularMomentMatrix(format!(
            "eigenvalues outside [0, 1): {eigenvalues:?}"
        )));
    }

    let tables = Tables::embedded()?;
    let mut trace_stats = Vec::with_capacity(k);
    let mut critical_values_95 = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for r in 0..k {
        let stat = -nf * eigenvalues[r..].iter().map(|&ev| (-ev).ln_1p()).sum::<T>();
        let dim = k - r;
        critical_values_95.push(T::lit(tables.trace_critical_value(deterministic, dim, 0.05)?));
        p_values.push(T::lit(tables.trace_p_value(deterministic, dim, stat.as_f64())?));
        trace_stats.push(stat);
    }
    Ok(JohansenResult {
        eigenvalues,
        trace_stats,
        critical_values_95,
        p_values,
        lag_order,
        deterministic,
        n_obs: n,
    })
}
