//! Recurrent forecasters (vanilla RNN, LSTM, GRU) with a linear head,
//! trained by full backpropagation through time under quantile or RMSE loss.

mod io;
mod loss;
mod network;
mod train;

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub use io::{load_forecaster, save_forecaster, FORMAT_VERSION};
pub use loss::{pinball, quantile_loss, rmse_loss};
pub use network::{Layout, Trace};
pub use train::{
    gradient_check, init_weights, predict, train, GradientCheck, Normalizer, GRADIENT_CHECK_COORDINATES, GRADIENT_CHECK_FLOOR,
    GRADIENT_CHECK_STEP,
};

pub const DEFAULT_QUANTILES: [f64; 3] = [0.1, 0.5, 0.9];
pub const DEFAULT_GRAD_CLIP: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("training diverged in epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {reason}")]
    Format { path: PathBuf, line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Rnn,
    Lstm,
    Gru,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Self::Rnn, Self::Lstm, Self::Gru];

    /// Stacked gate blocks in the input and recurrent matrices.
    pub fn gates(self) -> usize {
        match self {
            Self::Rnn => 1,
            // input, forget, cell candidate, output
            Self::Lstm => 4,
            // update, reset, candidate
            Self::Gru => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Rnn => "RNN",
            Self::Lstm => "LSTM",
            Self::Gru => "GRU",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.label().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossKind {
    Quantile { quantiles: Vec<f64> },
    Rmse,
}

impl LossKind {
    pub fn quantile() -> Self {
        LossKind::Quantile { quantiles: DEFAULT_QUANTILES.to_vec() }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Quantile { .. } => "Quantile",
            Self::Rmse => "RMSE",
        }
    }

    pub fn output_size(&self) -> usize {
        match self {
            Self::Quantile { quantiles } => quantiles.len(),
            Self::Rmse => 1,
        }
    }

    /// Output used as the single forecast: the quantile nearest the median.
    pub fn point_index(&self) -> usize {
        match self {
            Self::Quantile { quantiles } => quantiles
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
                .map_or(0, |(i, _)| i),
            Self::Rmse => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub hidden_size: usize,
    pub input_size: usize,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub window_len: usize,
    /// Global gradient-norm clip; off when `None`.
    pub grad_clip: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Lstm,
            hidden_size: 32,
            input_size: 1,
            loss: LossKind::quantile(),
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            window_len: crate::timeseries::DEFAULT_WINDOW_LEN,
            grad_clip: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.into()));
        if self.hidden_size == 0 {
            return bad("hidden_size must be positive");
        }
        if self.input_size == 0 {
            return bad("input_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.window_len == 0 {
            return bad("window_len must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0 && c.is_finite()) {
                return bad("grad_clip must be positive");
            }
        }
        if let LossKind::Quantile { quantiles } = &self.loss {
            if quantiles.is_empty() {
                return bad("at least one quantile is required");
            }
            if quantiles.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
                return bad("quantiles must lie strictly inside (0, 1)");
            }
            if quantiles.windows(2).any(|w| w[0] >= w[1]) {
                return bad("quantiles must be strictly ascending");
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout {
            architecture: self.architecture,
            input_size: self.input_size,
            hidden_size: self.hidden_size,
            output_size: self.loss.output_size(),
        }
    }

    pub(crate) fn quantiles<T: Scalar>(&self) -> Option<Vec<T>> {
        match &self.loss {
            LossKind::Quantile { quantiles } => Some(quantiles.iter().map(|&q| T::lit(q)).collect()),
            LossKind::Rmse => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForecaster<T> {
    pub config: ModelConfig,
    pub weights: Vec<T>,
    pub normalizer: Normalizer<T>,
    pub training_loss_history: Vec<T>,
}

impl<T: Scalar> TrainedForecaster<T> {
    pub fn layout(&self) -> Layout {
        self.config.layout()
    }

    /// Named weight segments in storage order.
    pub fn segments(&self) -> [(&'static str, &[T]); 5] {
        let l = self.layout();
        [
            ("input", &self.weights[l.input()]),
            ("recurrent", &self.weights[l.recurrent()]),
            ("bias", &self.weights[l.bias()]),
            ("head", &self.weights[l.head()]),
            ("head_bias", &self.weights[l.head_bias()]),
        ]
    }
}

/// Per-date forecasts in price units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries<T> {
    pub dates: Vec<NaiveDate>,
    /// One value per quantile in ascending quantile order, or one value for RMSE.
    pub predicted: Vec<Vec<T>>,
    pub actual: Vec<T>,
    /// Realized target price on the previous trading day.
    pub previous_close: Vec<T>,
    pub point_estimate: Vec<T>,
}

impl<T: Scalar> ForecastSeries<T> {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.dates.len();
        if [self.predicted.len(), self.actual.len(), self.previous_close.len(), self.point_estimate.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(ModelError::Shape("forecast fields differ in length".into()));
        }
        Ok(())
    }

    /// CSV with `date,actual,previous_close,point,<labels>...` columns.
    pub fn to_csv(&self, output_labels: &[String]) -> String {
        let mut out = String::from("date,actual,previous_close,point");
        for l in output_labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{}",
                self.dates[i], self.actual[i], self.previous_close[i], self.point_estimate[i]
            ));
            for v in &self.predicted[i] {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Output column labels for `config`: `q0.1`-style per quantile, or `rmse`.
pub fn output_labels(config: &ModelConfig) -> Vec<String> {
    match &config.loss {
        LossKind::Quantile { quantiles } => quantiles.iter().map(|q| format!("q{q}")).collect(),
        LossKind::Rmse => vec!["rmse".into()],
    }
}

/// Runs the recurrence from a zero state over `window` (`L × p`) and maps the
/// final hidden state through the head.
pub fn forward<T: Scalar>(config: &ModelConfig, weights: &[T], window: &Matrix<T>) -> Result<Vec<T>, ModelError> {
    Ok(forward_trace(config, weights, window)?.output)
}

/// [`forward`] keeping every intermediate state.
pub fn forward_trace<T: Scalar>(config: &ModelConfig, weights: &[T], window: &Matrix<T>) -> Result<Trace<T>, ModelError> {
    let layout = config.layout();
    layout.check(weights.len(), window)?;
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(ModelError::NonFinite("weights".into()));
    }
    if !window.is_finite() {
        return Err(ModelError::NonFinite("input window".into()));
    }
    Ok(network::run(&layout, weights, window))
}
