//! Buy-Sell-Hold backtesting of next-day forecasts.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ForecastSeries;
use crate::scalar::{mean, sample_std, Scalar};

pub const DEFAULT_THRESHOLD: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BacktestError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no trading days")]
    Empty,
    #[error("sharpe ratio undefined: {0}")]
    UndefinedSharpe(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CumulativeMode {
    /// Sum of daily gross returns.
    Literal,
    /// Product of daily gross returns.
    #[default]
    Compounded,
}

impl CumulativeMode {
    pub fn label(self) -> &'static str {
        match self {
            Self::Literal => "literal",
            Self::Compounded => "compounded",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Literal, Self::Compounded].into_iter().find(|m| m.label().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Position {
    Sell,
    Hold,
    Buy,
}

impl Position {
    pub fn sign(self) -> i8 {
        match self {
            Self::Sell => -1,
            Self::Hold => 0,
            Self::Buy => 1,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Self::Sell => Self::Buy,
            Self::Hold => Self::Hold,
            Self::Buy => Self::Sell,
        }
    }
}

impl From<Position> for i8 {
    fn from(p: Position) -> i8 {
        p.sign()
    }
}

impl TryFrom<i8> for Position {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, String> {
        match v {
            -1 => Ok(Self::Sell),
            0 => Ok(Self::Hold),
            1 => Ok(Self::Buy),
            _ => Err(format!("position {v} not in {{-1, 0, 1}}")),
        }
    }
}

/// Buy above `threshold`, sell below `−threshold`, hold in between.
pub fn position<T: Scalar>(v_d: T, threshold: T) -> Result<Position, BacktestError> {
    if !v_d.is_finite() {
        return Err(BacktestError::Domain(format!("deviation {v_d} is not finite")));
    }
    if !(threshold > T::zero()) {
        return Err(BacktestError::Domain(format!("threshold {threshold} must be positive")));
    }
    Ok(if v_d > threshold {
        Position::Buy
    } else if v_d < -threshold {
        Position::Sell
    } else {
        Position::Hold
    })
}

/// Predicted fractional move per day: point forecast over the previous
/// close, minus one.
pub fn deviations<T: Scalar>(forecast: &ForecastSeries<T>) -> Result<Vec<T>, BacktestError> {
    forecast.validate().map_err(|e| BacktestError::Shape(e.to_string()))?;
    if forecast.is_empty() {
        return Err(BacktestError::Empty);
    }
    forecast
        .point_estimate
        .iter()
        .zip(&forecast.previous_close)
        .map(|(&p, &prev)| {
            if !(prev > T::zero()) || !(p > T::zero()) {
                return Err(BacktestError::Domain(format!("non-positive price (predicted {p}, previous {prev})")));
            }
            Ok(p / prev - T::one())
        })
        .collect()
}

/// Gross return `exp(position · r)`.
pub fn daily_return<T: Scalar>(position: Position, log_return: T) -> T {
    match position {
        Position::Hold => T::one(),
        Position::Buy => log_return.exp(),
        Position::Sell => (-log_return).exp(),
    }
}

pub fn cumulative_return<T: Scalar>(daily_returns: &[T], mode: CumulativeMode) -> Result<T, BacktestError> {
    if daily_returns.is_empty() {
        return Err(BacktestError::Empty);
    }
    Ok(match mode {
        CumulativeMode::Literal => daily_returns.iter().copied().sum(),
        CumulativeMode::Compounded => daily_returns.iter().fold(T::one(), |acc, &g| acc * g),
    })
}

/// Cumulative return of holding the target long every day.
pub fn baseline_cumulative<T: Scalar>(log_returns: &[T], mode: CumulativeMode) -> Result<T, BacktestError> {
    let g: Vec<T> = log_returns.iter().map(|&r| daily_return(Position::Buy, r)).collect();
    cumulative_return(&g, mode)
}

/// Unannualized Sharpe ratio with the sample (n−1) standard deviation.
pub fn sharpe_ratio<T: Scalar>(returns: &[T], risk_free_rate: T) -> Result<T, BacktestError> {
    if returns.len() < 2 {
        return Err(BacktestError::UndefinedSharpe(format!("{} returns", returns.len())));
    }
    let sd = sample_std(returns);
    if !(sd > T::zero()) {
        return Err(BacktestError::UndefinedSharpe("zero standard deviation".into()));
    }
    Ok((mean(returns) - risk_free_rate) / sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cumulative<T> {
    pub literal: T,
    pub compounded: T,
}

impl<T: Scalar> Cumulative<T> {
    fn of(daily: &[T]) -> Result<Self, BacktestError> {
        Ok(Self {
            literal: cumulative_return(daily, CumulativeMode::Literal)?,
            compounded: cumulative_return(daily, CumulativeMode::Compounded)?,
        })
    }

    pub fn get(&self, mode: CumulativeMode) -> T {
        match mode {
            CumulativeMode::Literal => self.literal,
            CumulativeMode::Compounded => self.compounded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult<T> {
    pub dates: Vec<NaiveDate>,
    pub deviations: Vec<T>,
    pub positions: Vec<Position>,
    /// Realized log return of the target on each day.
    pub log_returns: Vec<T>,
    /// Portfolio gross return `g_n` per day.
    pub daily_returns: Vec<T>,
    pub cumulative_portfolio: Cumulative<T>,
    pub cumulative_baseline: Cumulative<T>,
    /// `None` when the portfolio returns have zero spread (e.g. all hold).
    pub sharpe_portfolio: Option<T>,
    pub sharpe_baseline: Option<T>,
    pub n_days: usize,
    /// Headline mode for reports; both modes are always kept.
    pub mode: CumulativeMode,
    pub threshold: T,
    pub risk_free_rate: T,
}

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{:.6}", v.as_f64()))
}

impl<T: Scalar> BacktestResult<T> {
    pub fn portfolio_return(&self) -> T {
        self.cumulative_portfolio.get(self.mode)
    }

    pub fn baseline_return(&self) -> T {
        self.cumulative_baseline.get(self.mode)
    }

    /// Signed log returns `position · r_n`.
    pub fn portfolio_log_returns(&self) -> Vec<T> {
        self.positions.iter().zip(&self.log_returns).map(|(p, &r)| T::lit(f64::from(p.sign())) * r).collect()
    }

    /// Per-day rows `date,v_d,position,g_n`.
    pub fn daily_csv(&self) -> String {
        let mut out = String::from("date,v_d,position,g_n\n");
        for i in 0..self.n_days {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.dates[i],
                self.deviations[i],
                self.positions[i].sign(),
                self.daily_returns[i]
            );
        }
        out
    }

    /// Tab-separated `key\tvalue` summary.
    pub fn summary(&self) -> String {
        let c = |v: T| format!("{:.6}", v.as_f64());
        let rows = [
            ("mode", self.mode.label().to_string()),
            ("days", self.n_days.to_string()),
            ("threshold", self.threshold.to_string()),
            ("risk_free_rate", self.risk_free_rate.to_string()),
            ("portfolio_cumulative_literal", c(self.cumulative_portfolio.literal)),
            ("portfolio_cumulative_compounded", c(self.cumulative_portfolio.compounded)),
            ("baseline_cumulative_literal", c(self.cumulative_baseline.literal)),
            ("baseline_cumulative_compounded", c(self.cumulative_baseline.compounded)),
            ("portfolio_sharpe", fmt_opt(self.sharpe_portfolio)),
            ("baseline_sharpe", fmt_opt(self.sharpe_baseline)),
            ("buy_days", self.positions.iter().filter(|&&p| p == Position::Buy).count().to_string()),
            ("sell_days", self.positions.iter().filter(|&&p| p == Position::Sell).count().to_string()),
            ("hold_days", self.positions.iter().filter(|&&p| p == Position::Hold).count().to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect()
    }
}

/// Trades the forecast: the position for day n comes from the forecast made
/// with data through day n−1 and earns that day's realized log return
/// `ln(actual_n / actual_{n−1})`. The baseline holds long every day.
pub fn run_backtest<T: Scalar>(
    forecast: &ForecastSeries<T>,
    threshold: T,
    mode: CumulativeMode,
    risk_free_rate: T,
) -> Result<BacktestResult<T>, BacktestError> {
    let deviations = deviations(forecast)?;
    let positions = deviations.iter().map(|&v| position(v, threshold)).collect::<Result<Vec<_>, _>>()?;
    let log_returns = forecast
        .actual
        .iter()
        .zip(&forecast.previous_close)
        .map(|(&a, &prev)| {
            if !(a > T::zero()) {
                return Err(BacktestError::Domain(format!("non-positive actual price {a}")));
            }
            Ok((a / prev).ln())
        })
        .collect::<Result<Vec<T>, _>>()?;
    let daily_returns: Vec<T> = positions.iter().zip(&log_returns).map(|(&p, &r)| daily_return(p, r)).collect();
    let baseline: Vec<T> = log_returns.iter().map(|&r| daily_return(Position::Buy, r)).collect();
    let mut result = BacktestResult {
        dates: forecast.dates.clone(),
        cumulative_portfolio: Cumulative::of(&daily_returns)?,
        cumulative_baseline: Cumulative::of(&baseline)?,
        sharpe_portfolio: None,
        sharpe_baseline: sharpe_ratio(&log_returns, risk_free_rate).ok(),
        n_days: daily_returns.len(),
        deviations,
        positions,
        log_returns,
        daily_returns,
        mode,
        threshold,
        risk_free_rate,
    };
    result.sharpe_portfolio = sharpe_ratio(&result.portfolio_log_returns(), risk_free_rate).ok();
    Ok(result)
}
