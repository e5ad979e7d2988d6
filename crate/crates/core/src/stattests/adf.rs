use serde::{Deserialize, Serialize};

use super::{RegressionKind, StatError, Tables};
use crate::linalg::{least_squares, LinalgError, Matrix};
use crate::scalar::{all_finite, Scalar};

/// How many lagged differences enter the ADF regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagSelection {
    Fixed(usize),
    /// Minimize AIC over `0..=max_lags` on a common sample, then refit the
    /// chosen order on the full available sample. `None` uses the Schwert
    /// rule `ceil(12 (n/100)^{1/4})`.
    Aic { max_lags: Option<usize> },
}

impl Default for LagSelection {
    fn default() -> Self {
        LagSelection::Aic { max_lags: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult<T> {
    /// t-ratio on the lagged level coefficient.
    pub statistic: T,
    pub p_value: T,
    pub lags_used: usize,
    /// Effective regression sample: series length − lags_used − 1.
    pub n_obs: usize,
    pub regression_kind: RegressionKind,
    /// (significance, critical value) at 1%, 5% and 10%.
    pub critical_values: Vec<(T, T)>,
    /// Best information criterion when lags were selected automatically.
    pub ic_best: Option<T>,
}

/// Design matrix for `Δy_t` on deterministic terms, `y_{t−1}` and `lags`
/// lagged differences, over rows `t = first..len` of the level series.
fn design<T: Scalar>(y: &[T], first: usize, lags: usize, kind: RegressionKind) -> (Matrix<T>, Vec<T>) {
    let n = y.len() - first;
    let nt = kind.n_trend();
    let x = Matrix::from_fn(n, nt + 1 + lags, |i, j| {
        let t = first + i;
        match j {
            0 if nt > 0 => T::one(),
            1 if nt > 1 => T::from_usize_lossy(i + 1),
            j if j == nt => y[t - 1],
            j => {
                let l = j - nt;
                y[t - l] - y[t - l - 1]
            }
        }
    });
    let dy = (first..y.len()).map(|t| y[t] - y[t - 1]).collect();
    (x, dy)
}

fn aic<T: Scalar>(ssr: T, n: usize, k: usize) -> T {
    let nf = T::from_usize_lossy(n);
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let llf = -nf / T::lit(2.0) * (T::one() + two_pi.ln() + (ssr / nf).ln());
    T::lit(-2.0) * llf + T::lit(2.0) * T::from_usize_lossy(k)
}

fn degenerate(e: LinalgError) -> StatError {
    StatError::DegenerateRegression(e.to_string())
}

/// Augmented Dickey-Fuller test of a unit root in `series`.
///
/// Fits `Δy_t = c + γ y_{t−1} + Σ β_i Δy_{t−i} + ε_t` by least squares and
/// reports the t-ratio of γ with its MacKinnon p-value.
pub fn adf_test<T: Scalar>(
    series: &[T],
    lags: LagSelection,
    kind: RegressionKind,
) -> Result<AdfResult<T>, StatError> {
    if !all_finite(series) {
        return Err(StatError::NonFinite);
    }
    let len = series.len();
    let max_lags = match lags {
        LagSelection::Fixed(k) => k,
        LagSelection::Aic { max_lags: Some(k) } => k,
        LagSelection::Aic { max_lags: None } => {
            let schwert = (12.0 * (len as f64 / 100.0).powf(0.25)).ceil() as usize;
            schwert.min((len / 2).saturating_sub(kind.n_trend() + 1))
        }
    };
    if len < max_lags + 10 {
        return Err(StatError::InsufficientData { needed: max_lags + 10, got: len });
    }
    let (lo, hi) = series.iter().fold((series[0], series[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return Err(StatError::DegenerateRegression("series is constant".into()));
    }
    let nt = kind.n_trend();

    let (used, ic_best) = match lags {
        LagSelection::Fixed(k) => (k, None),
        LagSelection::Aic { .. } => {
            let first = max_lags + 1;
            let (full, dy) = design(series, first, max_lags, kind);
            let n = full.rows();
            let mut best: Option<(T, usize)> = None;
            for lag in 0..=max_lags {
                let k = nt + 1 + lag;
                let x = Matrix::from_fn(n, k, |i, j| full[(i, j)]);
                let fit = least_squares(&x, &dy).map_err(degenerate)?;
                let ic = aic(fit.ssr, n, k);
                if best.map_or(true, |(b, _)| ic < b) {
                    best = Some((ic, lag));
                }
            }
            let (ic, lag) = best.expect("at least one candidate lag");
            (lag, Some(ic))
        }
    };

    let (x, dy) = design(series, used + 1, used, kind);
    if x.rows() <= x.cols() {
        return Err(StatError::InsufficientData { needed: used + 2 + x.cols(), got: len });
    }
    let fit = least_squares(&x, &dy).map_err(degenerate)?;
    let statistic = fit.coef[nt] / fit.std_errors[nt];
    if !statistic.is_finite() {
        return Err(StatError::DegenerateRegression("zero residual variance".into()));
    }
    let tables = Tables::embedded()?;
    let p_value = T::lit(tables.adf_p_value(kind, statistic.as_f64())?);
    let n_obs = x.rows();
    let critical_values = tables
        .adf_critical_values(kind, n_obs)?
        .into_iter()
        .map(|(l, c)| (T::lit(l), T::lit(c)))
        .collect();
    Ok(AdfResult {
        statistic,
        p_value,
        lags_used: used,
        n_obs,
        regression_kind: kind,
        critical_values,
        ic_best,
    })
}
