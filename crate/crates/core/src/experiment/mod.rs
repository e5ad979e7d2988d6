//! Config-driven pipeline: load, align, select, window, split, train,
//! predict and backtest, for one cell or a whole grid of cells.

mod config;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    BacktestConfig, DataConfig, ExperimentConfig, GridConfig, LossChoice, ModelSection, OutputConfig, SelectionConfig,
    SplitConfig,
};
pub use report::{GridMetadata, GridReport, GridRow, RowOutcome};

use crate::backtest::{run_backtest, BacktestResult};
use crate::model::{output_labels, predict, save_forecaster, train, Architecture, ForecastSeries, TrainedForecaster};
use crate::selection::{select, SelectionMethod, SelectionReport};
use crate::timeseries::{align_and_interpolate, chrono_split, load_csv, make_windows, train_size, AlignedPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Select,
    Window,
    Train,
    Predict,
    Backtest,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Config => "config",
            Self::Ingest => "ingest",
            Self::Select => "select",
            Self::Window => "window",
            Self::Train => "train",
            Self::Predict => "predict",
            Self::Backtest => "backtest",
            Self::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct ExperimentError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl ExperimentError {
    pub fn new(stage: Stage, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        Self { stage, source: source.into() }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Self::new(Stage::Config, message.into())
    }
}

fn at<E: std::error::Error + Send + Sync + 'static>(stage: Stage) -> impl FnOnce(E) -> ExperimentError {
    move |e| ExperimentError::new(stage, e)
}

/// One grid cell: selection method × loss × architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub selection: SelectionMethod,
    pub loss: LossChoice,
    pub architecture: Architecture,
}

impl Cell {
    /// `Cointegration+Quantile+GRU` style label.
    pub fn label(&self) -> String {
        format!("{}+{}+{}", self.selection.label(), self.loss.label(), self.architecture.label())
    }

    /// Directory-safe form of the label.
    pub fn slug(&self) -> String {
        self.label().to_lowercase().replace('+', "_")
    }

    /// The configured cell.
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self { selection: config.selection.method, loss: config.model.loss, architecture: config.model.architecture }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The default 12-cell grid: every selection method and loss with LSTM and GRU.
pub fn default_cells() -> Vec<Cell> {
    let mut cells = Vec::with_capacity(12);
    for selection in SelectionMethod::ALL {
        for loss in [LossChoice::Quantile, LossChoice::Rmse] {
            for architecture in [Architecture::Lstm, Architecture::Gru] {
                cells.push(Cell { selection, loss, architecture });
            }
        }
    }
    cells
}

/// Parses a comma-separated cell list such as
/// `Cointegration+Quantile+GRU,All+RMSE+LSTM`. A `*` component expands to
/// every value (architectures expand to LSTM and GRU); `all` alone is the
/// default grid.
pub fn parse_cells(spec: &str) -> Result<Vec<Cell>, String> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("all") || spec == "*" {
        return Ok(default_cells());
    }
    let mut cells = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split('+').map(str::trim).collect();
        let [sel, loss, arch] = parts.as_slice() else {
            return Err(format!("cell `{item}` must look like Selection+Loss+Architecture"));
        };
        let sels = match *sel {
            "*" => SelectionMethod::ALL.to_vec(),
            s => vec![SelectionMethod::parse(s).ok_or_else(|| format!("unknown selection method `{s}`"))?],
        };
        let losses = match *loss {
            "*" => vec![LossChoice::Quantile, LossChoice::Rmse],
            s => vec![LossChoice::parse(s).ok_or_else(|| format!("unknown loss `{s}`"))?],
        };
        let archs = match *arch {
            "*" => vec![Architecture::Lstm, Architecture::Gru],
            s => vec![Architecture::parse(s).ok_or_else(|| format!("unknown architecture `{s}`"))?],
        };
        for &selection in &sels {
            for &loss in &losses {
                for &architecture in &archs {
                    cells.push(Cell { selection, loss, architecture });
                }
            }
        }
    }
    if cells.is_empty() {
        return Err("no cells requested".into());
    }
    Ok(cells)
}

/// Loads every configured ticker and aligns them with the target first.
pub fn load_panel(config: &ExperimentConfig) -> Result<AlignedPanel<f64>, ExperimentError> {
    config.validate()?;
    let tickers = std::iter::once(&config.data.target).chain(&config.data.candidates);
    let mut series = Vec::new();
    for t in tickers {
        let s = load_csv::<f64>(config.csv_path(t)).map_err(at(Stage::Ingest))?;
        series.push(s.within(config.data.start, config.data.end));
    }
    align_and_interpolate(&series, &config.data.target, config.data.calendar).map_err(at(Stage::Ingest))
}

/// Panel rows covered by the training samples: their input windows and targets.
pub fn training_rows(config: &ExperimentConfig, panel: &AlignedPanel<f64>) -> Result<usize, ExperimentError> {
    let l = config.model.window_len;
    let n = panel.n_days().saturating_sub(l);
    let n_train = train_size(n, config.split.train_fraction).map_err(at(Stage::Window))?;
    Ok(l + n_train)
}

/// Selection on the training rows only, so test prices never inform the
/// choice of inputs.
pub fn select_factors(
    config: &ExperimentConfig,
    panel: &AlignedPanel<f64>,
    method: SelectionMethod,
) -> Result<SelectionReport<f64>, ExperimentError> {
    let rows = training_rows(config, panel)?;
    select(&panel.head(rows), method, config.selection.k, config.selection.lag_order).map_err(at(Stage::Select))
}

/// Everything one cell produced.
#[derive(Debug, Clone)]
pub struct CellArtifacts {
    pub cell: Cell,
    pub selection: SelectionReport<f64>,
    pub model: TrainedForecaster<f64>,
    pub forecast: ForecastSeries<f64>,
    pub backtest: BacktestResult<f64>,
}

/// Runs one cell on a loaded panel; writes artifacts when `out_dir` is given.
pub fn run_cell(
    config: &ExperimentConfig,
    panel: &AlignedPanel<f64>,
    cell: Cell,
    out_dir: Option<&Path>,
) -> Result<CellArtifacts, ExperimentError> {
    let selection = select_factors(config, panel, cell.selection)?;
    let columns = selection.feature_columns(panel);
    let data = make_windows(panel, &columns, config.model.window_len).map_err(at(Stage::Window))?;
    let (train_set, test_set) = chrono_split(&data, config.split.train_fraction).map_err(at(Stage::Window))?;
    let model_config = config.model.model_config(cell.architecture, cell.loss, columns.len());
    let model = train(&model_config, &train_set).map_err(at(Stage::Train))?;
    let forecast = predict(&model, &test_set).map_err(at(Stage::Predict))?;
    let bt = &config.backtest;
    let backtest = run_backtest(&forecast, bt.threshold, bt.mode, bt.risk_free_rate).map_err(at(Stage::Backtest))?;
    let artifacts = CellArtifacts { cell, selection, model, forecast, backtest };
    if let Some(dir) = out_dir {
        write_artifacts(&artifacts, dir)?;
    }
    Ok(artifacts)
}

/// File names written by [`write_artifacts`].
pub const ARTIFACT_FILES: [&str; 7] = [
    "selection.json",
    "selection.tsv",
    "model.txt",
    "forecast.csv",
    "backtest.json",
    "backtest.tsv",
    "backtest_daily.csv",
];

pub fn write_artifacts(a: &CellArtifacts, dir: &Path) -> Result<(), ExperimentError> {
    let io = |path: PathBuf| {
        move |e: std::io::Error| ExperimentError::new(Stage::Write, format!("{}: {e}", path.display()))
    };
    std::fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io(path))
    };
    write("selection.json", a.selection.to_json())?;
    write("selection.tsv", a.selection.to_table())?;
    save_forecaster(&a.model, dir.join("model.txt")).map_err(at(Stage::Write))?;
    write("forecast.csv", a.forecast.to_csv(&output_labels(&a.model.config)))?;
    write("backtest.json", serde_json::to_string_pretty(&a.backtest).expect("backtest serializes"))?;
    write("backtest.tsv", a.backtest.summary())?;
    write("backtest_daily.csv", a.backtest.daily_csv())
}

/// Loads the data and runs the configured cell, writing artifacts under
/// `<output.dir>/<cell>`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(GridRow, CellArtifacts), ExperimentError> {
    let panel = load_panel(config)?;
    let cell = Cell::from_config(config);
    let artifacts = run_cell(config, &panel, cell, Some(&config.output.dir.join(cell.slug())))?;
    Ok((GridRow::from_artifacts(&artifacts), artifacts))
}

/// Runs `cells` on one shared panel with a bounded worker pool. Failed cells
/// become failed rows; rows keep the requested order.
pub fn run_grid(
    config: &ExperimentConfig,
    cells: &[Cell],
    out_dir: Option<&Path>,
) -> Result<GridReport, ExperimentError> {
    if cells.is_empty() {
        return Err(ExperimentError::config("no grid cells requested"));
    }
    let panel = load_panel(config)?;
    let run = |cell: &Cell| match run_cell(config, &panel, *cell, out_dir.map(|d| d.join(cell.slug())).as_deref()) {
        Ok(a) => GridRow::from_artifacts(&a),
        Err(e) => GridRow::failed(*cell, &e),
    };
    let workers = match config.grid.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(cells.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExperimentError::new(Stage::Config, e))?;
    let rows: Vec<GridRow> = pool.install(|| cells.par_iter().map(run).collect());
    let report = GridReport { metadata: GridMetadata::new(config, &panel)?, rows };
    if let Some(dir) = out_dir {
        report.write(dir)?;
    }
    Ok(report)
}
