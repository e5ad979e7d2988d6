use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::backtest::{CumulativeMode, DEFAULT_THRESHOLD};
use crate::model::{Architecture, LossKind, ModelConfig, DEFAULT_QUANTILES};
use crate::selection::{SelectionMethod, DEFAULT_K};
use crate::timeseries::{CalendarPolicy, DEFAULT_TRAIN_FRACTION, DEFAULT_WINDOW_LEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding one `<ticker>.csv` per series.
    pub dir: PathBuf,
    pub target: String,
    pub candidates: Vec<String>,
    #[serde(default)]
    pub start: Option<NaiveDate>,
    #[serde(default)]
    pub end: Option<NaiveDate>,
    #[serde(default)]
    pub calendar: CalendarPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    pub k: usize,
    /// Lagged differences in the Johansen VECM.
    pub lag_order: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { method: SelectionMethod::Cointegration, k: DEFAULT_K, lag_order: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossChoice {
    Quantile,
    Rmse,
}

impl LossChoice {
    pub fn label(self) -> &'static str {
        match self {
            Self::Quantile => "Quantile",
            Self::Rmse => "RMSE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Quantile, Self::Rmse].into_iter().find(|l| l.label().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub architecture: Architecture,
    pub loss: LossChoice,
    /// Ascending, each strictly inside (0, 1); used by the quantile loss.
    pub quantiles: Vec<f64>,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Days of history per sample.
    pub window_len: usize,
    pub grad_clip: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            architecture: m.architecture,
            loss: LossChoice::Quantile,
            quantiles: DEFAULT_QUANTILES.to_vec(),
            hidden_size: m.hidden_size,
            learning_rate: m.learning_rate,
            epochs: m.epochs,
            batch_size: m.batch_size,
            seed: m.seed,
            window_len: DEFAULT_WINDOW_LEN,
            grad_clip: None,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, architecture: Architecture, loss: LossChoice, input_size: usize) -> ModelConfig {
        ModelConfig {
            architecture,
            hidden_size: self.hidden_size,
            input_size,
            loss: match loss {
                LossChoice::Quantile => LossKind::Quantile { quantiles: self.quantiles.clone() },
                LossChoice::Rmse => LossKind::Rmse,
            },
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            window_len: self.window_len,
            grad_clip: self.grad_clip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    /// Half-width of the hold band on the predicted fractional move.
    pub threshold: f64,
    pub mode: CumulativeMode,
    pub risk_free_rate: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, mode: CumulativeMode::Compounded, risk_free_rate: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_fraction: DEFAULT_TRAIN_FRACTION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Concurrent cells; 0 uses every available core.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub backtest: BacktestConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

impl ExperimentConfig {
    /// Parses TOML; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ExperimentError> {
        let mut c: Self = toml::from_str(text).map_err(|e| ExperimentError::config(e.message()))?;
        if c.data.dir.is_relative() {
            c.data.dir = base.join(&c.data.dir);
        }
        if c.output.dir.is_relative() {
            c.output.dir = base.join(&c.output.dir);
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let c = Self::from_toml(&text, base)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that does not need the data files.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::config(m));
        if self.data.candidates.contains(&self.data.target) {
            return bad(format!("target {} is also listed as a candidate", self.data.target));
        }
        if self.data.candidates.is_empty() {
            return bad("no candidate tickers".into());
        }
        if let (Some(s), Some(e)) = (self.data.start, self.data.end) {
            if s > e {
                return bad(format!("start {s} is after end {e}"));
            }
        }
        if self.selection.method != SelectionMethod::All
            && !(1..=self.data.candidates.len()).contains(&self.selection.k)
        {
            return bad(format!("k = {} must lie in 1..={}", self.selection.k, self.data.candidates.len()));
        }
        if !(self.backtest.threshold > 0.0) {
            return bad("backtest threshold must be positive".into());
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)".into());
        }
        for loss in [LossChoice::Quantile, LossChoice::Rmse] {
            self.model
                .model_config(self.model.architecture, loss, 1)
                .validate()
                .map_err(|e| ExperimentError::config(e.to_string()))?;
        }
        Ok(())
    }

    /// CSV path for `ticker`.
    pub fn csv_path(&self, ticker: &str) -> PathBuf {
        self.data.dir.join(format!("{ticker}.csv"))
    }
}
