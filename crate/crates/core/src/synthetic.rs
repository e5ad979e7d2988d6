//! Seeded synthetic price panels with known cointegration structure.
//!
//! A latent log-price trend `w_t` follows a Gaussian random walk. The target
//! tracks the trend with a one-day delay, `ln s_t = w_{t−1} + noise`, and each
//! cointegrated companion tracks it on the same day, `ln c_t = a + w_t +
//! noise`, so companions lead the target by one day. Noise tickers are
//! independent random walks of the same volatility.

use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::timeseries::{write_csv, DataError, PriceSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub days: usize,
    pub cointegrated: usize,
    pub noise: usize,
    /// Daily log-volatility of the latent trend and the noise walks.
    pub trend_vol: f64,
    /// Log-volatility of each series around the trend.
    pub tracking_vol: f64,
    /// Interior closes per companion blanked out to exercise gap filling.
    pub gaps_per_series: usize,
    pub start: NaiveDate,
    pub target: String,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            days: 120,
            cointegrated: 2,
            noise: 2,
            trend_vol: 0.025,
            tracking_vol: 0.005,
            gaps_per_series: 0,
            start: NaiveDate::from_ymd_opt(2020, 1, 2).expect("valid date"),
            target: "TARGET".into(),
        }
    }
}

impl FixtureSpec {
    pub fn cointegrated_tickers(&self) -> Vec<String> {
        (0..self.cointegrated).map(|i| format!("COINT_{}", letter(i))).collect()
    }

    pub fn noise_tickers(&self) -> Vec<String> {
        (0..self.noise).map(|i| format!("WALK_{}", letter(i))).collect()
    }

    /// Candidate tickers: cointegrated companions, then noise walks.
    pub fn candidate_tickers(&self) -> Vec<String> {
        let mut t = self.cointegrated_tickers();
        t.extend(self.noise_tickers());
        t
    }
}

/// Seed of the dataset shipped in `fixtures/synthetic`.
pub const BUNDLED_SEED: u64 = 42;

/// Five tickers over 120 trading days, two cointegrated companions and two
/// walks, with a few gaps in each companion.
pub fn bundled_spec() -> FixtureSpec {
    FixtureSpec { gaps_per_series: 2, ..FixtureSpec::default() }
}

fn letter(i: usize) -> char {
    char::from(b'A' + (i % 26) as u8)
}

/// `n` consecutive weekdays from `start` (inclusive when it is a weekday).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Target first, then the candidates in [`FixtureSpec::candidate_tickers`] order.
pub fn generate(spec: &FixtureSpec, seed: u64) -> Vec<PriceSeries<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, spec.trend_vol).expect("finite volatility");
    let track = Normal::new(0.0, spec.tracking_vol).expect("finite volatility");
    let n = spec.days;
    let dates = business_days(spec.start, n);

    // One extra leading value so the target has a lagged trend on day 0.
    let mut trend = Vec::with_capacity(n + 1);
    let mut w = 100f64.ln();
    trend.push(w);
    for _ in 0..n {
        w += step.sample(&mut rng);
        trend.push(w);
    }

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let target: Vec<f64> = (0..n).map(|t| (trend[t] + track.sample(&mut rng)).exp()).collect();
    columns.push((spec.target.clone(), target));
    for name in spec.cointegrated_tickers() {
        let level: f64 = rng.gen_range(-0.5..0.5);
        let col = (0..n).map(|t| (level + trend[t + 1] + track.sample(&mut rng)).exp()).collect();
        columns.push((name, col));
    }
    for name in spec.noise_tickers() {
        let mut v = 100f64.ln() + rng.gen_range(-0.5..0.5);
        let col = (0..n)
            .map(|_| {
                v += step.sample(&mut rng);
                v.exp()
            })
            .collect();
        columns.push((name, col));
    }

    columns
        .into_iter()
        .enumerate()
        .map(|(i, (name, values))| {
            let mut close: Vec<Option<f64>> = values.into_iter().map(Some).collect();
            if i > 0 && n > 2 {
                for _ in 0..spec.gaps_per_series {
                    close[rng.gen_range(1..n - 1)] = None;
                }
            }
            PriceSeries::new(name, dates.clone(), close).expect("generated series is valid")
        })
        .collect()
}

/// Writes one `<ticker>.csv` per generated series into `dir`.
pub fn write_fixture(spec: &FixtureSpec, seed: u64, dir: impl AsRef<Path>) -> Result<Vec<PriceSeries<f64>>, DataError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.to_path_buf(), source })?;
    let series = generate(spec, seed);
    for s in &series {
        write_csv(s, dir.join(format!("{}.csv", s.ticker())))?;
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stattests::johansen_pairwise;

    #[test]
    fn business_days_skip_weekends() {
        let d = business_days(NaiveDate::from_ymd_opt(2024, 1, 5).unwrap(), 3);
        assert_eq!(d[0].weekday(), Weekday::Fri);
        assert_eq!(d[1].weekday(), Weekday::Mon);
        assert_eq!(d[2].weekday(), Weekday::Tue);
    }

    #[test]
    fn generation_is_seeded() {
        let spec = FixtureSpec { gaps_per_series: 2, ..FixtureSpec::default() };
        let a = generate(&spec, 4);
        assert_eq!(a, generate(&spec, 4));
        assert_ne!(a, generate(&spec, 5));
        assert_eq!(a.len(), 5);
        assert_eq!(a[0].gap_count(), 0);
        assert!(a[1..].iter().all(|s| (1..=2).contains(&s.gap_count())));
    }

    #[test]
    fn companions_are_cointegrated_with_target() {
        let spec = FixtureSpec { days: 400, ..FixtureSpec::default() };
        let s = generate(&spec, 1);
        let col = |i: usize| s[i].close().iter().map(|v| v.unwrap()).collect::<Vec<_>>();
        for i in 1..=2 {
            assert!(johansen_pairwise(&col(0), &col(i), 1).unwrap().rejects_rank0_at_95());
        }
    }
}
