//! Factor selection by cointegration or correlation, recurrent quantile
//! forecasters trained from scratch, and Buy-Sell-Hold backtesting.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision types used by the pipeline.

pub mod backtest;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod selection;
pub mod stattests;
pub mod synthetic;
pub mod timeseries;

pub use scalar::Scalar;

pub type Series = timeseries::PriceSeries<f64>;
pub type Panel = timeseries::AlignedPanel<f64>;
pub type Dataset = timeseries::WindowedDataset<f64>;
pub type Selection = selection::SelectionReport<f64>;
pub type Forecaster = model::TrainedForecaster<f64>;
pub type Forecast = model::ForecastSeries<f64>;
pub type Backtest = backtest::BacktestResult<f64>;
pub type Adf = stattests::AdfResult<f64>;
pub type Johansen = stattests::JohansenResult<f64>;
