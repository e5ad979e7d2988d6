use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{training_rows, Cell, CellArtifacts, ExperimentConfig, ExperimentError, Stage};
use crate::backtest::CumulativeMode;
use crate::timeseries::AlignedPanel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RowOutcome {
    Completed {
        cumulative_literal: f64,
        cumulative_compounded: f64,
        sharpe: Option<f64>,
        baseline_literal: f64,
        baseline_compounded: f64,
        baseline_sharpe: Option<f64>,
        days: usize,
        factors: Vec<String>,
    },
    Failed {
        stage: Stage,
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub cell: Cell,
    pub outcome: RowOutcome,
}

impl GridRow {
    pub fn from_artifacts(a: &CellArtifacts) -> Self {
        let b = &a.backtest;
        Self {
            cell: a.cell,
            outcome: RowOutcome::Completed {
                cumulative_literal: b.cumulative_portfolio.literal,
                cumulative_compounded: b.cumulative_portfolio.compounded,
                sharpe: b.sharpe_portfolio,
                baseline_literal: b.cumulative_baseline.literal,
                baseline_compounded: b.cumulative_baseline.compounded,
                baseline_sharpe: b.sharpe_baseline,
                days: b.n_days,
                factors: a.selection.chosen.clone(),
            },
        }
    }

    pub fn failed(cell: Cell, e: &ExperimentError) -> Self {
        Self { cell, outcome: RowOutcome::Failed { stage: e.stage, error: e.source.to_string() } }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self.outcome, RowOutcome::Completed { .. })
    }

    /// Portfolio cumulative return in `mode`, if the cell completed.
    pub fn cumulative(&self, mode: CumulativeMode) -> Option<f64> {
        match &self.outcome {
            RowOutcome::Completed { cumulative_literal, cumulative_compounded, .. } => Some(match mode {
                CumulativeMode::Literal => *cumulative_literal,
                CumulativeMode::Compounded => *cumulative_compounded,
            }),
            RowOutcome::Failed { .. } => None,
        }
    }

    pub fn sharpe(&self) -> Option<f64> {
        match &self.outcome {
            RowOutcome::Completed { sharpe, .. } => *sharpe,
            RowOutcome::Failed { .. } => None,
        }
    }
}

/// Run settings recorded alongside the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub version: String,
    pub target: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub days: usize,
    pub train_fraction: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    pub seed: u64,
    pub window_len: usize,
    pub hidden_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub quantiles: Vec<f64>,
    pub k: usize,
    pub lag_order: usize,
    pub threshold: f64,
    pub mode: CumulativeMode,
    pub risk_free_rate: f64,
}

impl GridMetadata {
    pub fn new(config: &ExperimentConfig, panel: &AlignedPanel<f64>) -> Result<Self, ExperimentError> {
        let l = config.model.window_len;
        let train_samples = training_rows(config, panel)? - l;
        let m = &config.model;
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            target: config.data.target.clone(),
            start: panel.dates()[0],
            end: *panel.dates().last().expect("non-empty panel"),
            days: panel.n_days(),
            train_fraction: config.split.train_fraction,
            train_samples,
            test_samples: panel.n_days() - l - train_samples,
            seed: m.seed,
            window_len: l,
            hidden_size: m.hidden_size,
            epochs: m.epochs,
            learning_rate: m.learning_rate,
            batch_size: m.batch_size,
            quantiles: m.quantiles.clone(),
            k: config.selection.k,
            lag_order: config.selection.lag_order,
            threshold: config.backtest.threshold,
            mode: config.backtest.mode,
            risk_free_rate: config.backtest.risk_free_rate,
        })
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        let qs: Vec<String> = self.quantiles.iter().map(f64::to_string).collect();
        vec![
            ("version", self.version.clone()),
            ("target", self.target.clone()),
            ("start", self.start.to_string()),
            ("end", self.end.to_string()),
            ("days", self.days.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("train_samples", self.train_samples.to_string()),
            ("test_samples", self.test_samples.to_string()),
            ("seed", self.seed.to_string()),
            ("window_len", self.window_len.to_string()),
            ("hidden_size", self.hidden_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("quantiles", qs.join(",")),
            ("k", self.k.to_string()),
            ("lag_order", self.lag_order.to_string()),
            ("threshold", self.threshold.to_string()),
            ("mode", self.mode.label().to_string()),
            ("risk_free_rate", self.risk_free_rate.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub metadata: GridMetadata,
    pub rows: Vec<GridRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl GridReport {
    pub const TSV_HEADER: &'static str = "method\tselection\tloss\tarchitecture\tstatus\tcumulative_literal\tcumulative_compounded\tsharpe\tbaseline_literal\tbaseline_compounded\tbaseline_sharpe\tdays\tfactors";

    /// Metadata as `# key<TAB>value` lines, then one row per cell.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.metadata.pairs() {
            let _ = writeln!(out, "# {k}\t{v}");
        }
        out.push_str(Self::TSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let c = &r.cell;
            let _ = write!(out, "{}\t{}\t{}\t{}", c.label(), c.selection.label(), c.loss.label(), c.architecture.label());
            match &r.outcome {
                RowOutcome::Completed {
                    cumulative_literal,
                    cumulative_compounded,
                    sharpe,
                    baseline_literal,
                    baseline_compounded,
                    baseline_sharpe,
                    days,
                    factors,
                } => {
                    let _ = writeln!(
                        out,
                        "\tok\t{cumulative_literal}\t{cumulative_compounded}\t{}\t{baseline_literal}\t{baseline_compounded}\t{}\t{days}\t{}",
                        opt(*sharpe),
                        opt(*baseline_sharpe),
                        factors.join(","),
                    );
                }
                RowOutcome::Failed { stage, error } => {
                    let error = error.replace(['\t', '\n'], " ");
                    let _ = writeln!(out, "\tfailed ({stage}: {error})\tNA\tNA\tNA\tNA\tNA\tNA\tNA\t");
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid report serializes")
    }

    /// Aligned, human-readable results table.
    pub fn to_table(&self) -> String {
        let mode = self.metadata.mode;
        let other = match mode {
            CumulativeMode::Literal => CumulativeMode::Compounded,
            CumulativeMode::Compounded => CumulativeMode::Literal,
        };
        let headers = [
            "Method".to_string(),
            format!("Cumulative return ({})", mode.label()),
            format!("Cumulative return ({})", other.label()),
            "Sharpe ratio".to_string(),
        ];
        let mut rows: Vec<[String; 4]> = Vec::new();
        for r in &self.rows {
            let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
            rows.push(match &r.outcome {
                RowOutcome::Completed { .. } => {
                    [r.cell.label(), f(r.cumulative(mode)), f(r.cumulative(other)), f(r.sharpe())]
                }
                RowOutcome::Failed { stage, .. } => {
                    [r.cell.label(), format!("failed ({stage})"), "-".into(), "-".into()]
                }
            });
        }
        if let Some(RowOutcome::Completed { baseline_literal, baseline_compounded, baseline_sharpe, .. }) =
            self.rows.iter().map(|r| &r.outcome).find(|o| matches!(o, RowOutcome::Completed { .. }))
        {
            let (main, alt) = match mode {
                CumulativeMode::Literal => (baseline_literal, baseline_compounded),
                CumulativeMode::Compounded => (baseline_compounded, baseline_literal),
            };
            let f = |v: f64| format!("{v:.3}");
            rows.push([
                format!("{} (buy and hold)", self.metadata.target),
                f(*main),
                f(*alt),
                baseline_sharpe.map_or_else(|| "-".into(), f),
            ]);
        }
        let widths: Vec<usize> =
            (0..4).map(|j| rows.iter().map(|r| r[j].len()).chain([headers[j].len()]).max().unwrap_or(0)).collect();
        let line = |cells: &[String]| {
            let mut s = format!("{:<w$}", cells[0], w = widths[0]);
            for j in 1..4 {
                let _ = write!(s, "  {:>w$}", cells[j], w = widths[j]);
            }
            s.push('\n');
            s
        };
        let mut out = line(&headers);
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 6));
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r));
        }
        out
    }

    /// Writes `grid.tsv`, `grid.json` and `grid.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::new(Stage::Write, e))?;
        for (name, body) in [("grid.tsv", self.to_tsv()), ("grid.json", self.to_json()), ("grid.txt", self.to_table())] {
            let path = dir.join(name);
            std::fs::write(&path, body)
                .map_err(|e| ExperimentError::new(Stage::Write, format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}
