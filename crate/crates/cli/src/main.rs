use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use coinfactor::backtest::CumulativeMode;
use coinfactor::experiment::{
    load_panel, parse_cells, run_cell, run_grid, select_factors, training_rows, write_artifacts, Cell, ExperimentConfig,
};
use coinfactor::model::{save_forecaster, train};
use coinfactor::stattests::{adf_test, johansen_pairwise, LagSelection, RegressionKind};
use coinfactor::timeseries::{chrono_split, make_windows};

const DEFAULT_CONFIG: &str = "coinfactor.toml";

#[derive(Parser, Debug)]
#[command(name = "coinfactor", version, about = "Factor selection, recurrent forecasting and backtesting")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, default_value = DEFAULT_CONFIG)]
    config: PathBuf,
    /// Overrides `model.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid cells, e.g. `Cointegration+Quantile+GRU,All+RMSE+LSTM` or `all`.
    #[arg(long, global = true)]
    cells: Option<String>,
    /// Headline cumulative-return mode; overrides `backtest.mode`.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Literal,
    Compounded,
}

impl From<Mode> for CumulativeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Literal => CumulativeMode::Literal,
            Mode::Compounded => CumulativeMode::Compounded,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate and align the configured price files.
    Ingest,
    /// Unit-root and pairwise cointegration tests against the target.
    Test,
    /// Rank candidate factors with the configured method.
    Select,
    /// Train the configured cell and save the model.
    Train,
    /// Train, forecast the test split and backtest the configured cell.
    Backtest,
    /// Run a grid of cells and write the results table.
    Grid,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config =
        ExperimentConfig::load(&cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    if let Some(seed) = cli.seed {
        config.model.seed = seed;
    }
    if let Some(mode) = cli.mode {
        config.backtest.mode = mode.into();
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    Ok(config)
}

/// The single cell for `train`/`backtest`: `--cells` if it names exactly one,
/// otherwise the configured one.
fn single_cell(cli: &Cli, config: &ExperimentConfig) -> Result<Cell> {
    match &cli.cells {
        None => Ok(Cell::from_config(config)),
        Some(spec) => {
            let cells = parse_cells(spec).map_err(anyhow::Error::msg)?;
            match cells.as_slice() {
                [c] => Ok(*c),
                _ => bail!("this command runs one cell; `{spec}` names {}", cells.len()),
            }
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    let out_dir = config.output.dir.clone();
    match cli.command {
        Command::Ingest => {
            let panel = load_panel(&config)?;
            let mut out = String::from("ticker\trole\tdays\tfirst\tlast\tmin\tmax\n");
            for (j, t) in panel.tickers().iter().enumerate() {
                let col = panel.column(j);
                let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                let role = if j == panel.target_index() { "target" } else { "candidate" };
                let _ = writeln!(
                    out,
                    "{t}\t{role}\t{}\t{}\t{}\t{}\t{}",
                    panel.n_days(),
                    panel.dates()[0],
                    panel.dates()[panel.n_days() - 1],
                    fmt_f(lo),
                    fmt_f(hi)
                );
            }
            print!("{out}");
            let path = out_dir.join("aligned.csv");
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            panel.write_csv(&path)?;
            eprintln!("aligned panel written to {}", path.display());
        }
        Command::Test => {
            let panel = load_panel(&config)?;
            let target = panel.column(panel.target_index());
            let mut out = String::from(
                "ticker\tadf_stat\tadf_p\tadf_lags\tdiff_adf_stat\tdiff_adf_p\ttrace_r0\ttrace_r0_cv95\ttrace_r0_p\tcointegrated_95\n",
            );
            for (j, t) in panel.tickers().iter().enumerate() {
                let col = panel.column(j);
                let diff: Vec<f64> = col.windows(2).map(|w| w[1] - w[0]).collect();
                let level = adf_test(&col, LagSelection::default(), RegressionKind::Constant)
                    .with_context(|| format!("ADF on {t}"))?;
                let differenced = adf_test(&diff, LagSelection::default(), RegressionKind::Constant)
                    .with_context(|| format!("ADF on differenced {t}"))?;
                let _ = write!(
                    out,
                    "{t}\t{}\t{}\t{}\t{}\t{}",
                    fmt_f(level.statistic),
                    fmt_f(level.p_value),
                    level.lags_used,
                    fmt_f(differenced.statistic),
                    fmt_f(differenced.p_value)
                );
                if j == panel.target_index() {
                    out.push_str("\t-\t-\t-\t-\n");
                    continue;
                }
                match johansen_pairwise(&target, &col, config.selection.lag_order) {
                    Ok(r) => {
                        let _ = writeln!(
                            out,
                            "\t{}\t{}\t{}\t{}",
                            fmt_f(r.trace_stats[0]),
                            fmt_f(r.critical_values_95[0]),
                            fmt_f(r.rank0_p_value()),
                            if r.rejects_rank0_at_95() { "yes" } else { "no" }
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(out, "\tNA\tNA\tNA\t{e}");
                    }
                }
            }
            print!("{out}");
        }
        Command::Select => {
            let panel = load_panel(&config)?;
            let report = select_factors(&config, &panel, config.selection.method)?;
            print!("{}", report.to_table());
            write_file(&out_dir.join("selection.json"), &report.to_json())?;
            eprintln!(
                "selection used the first {} of {} days",
                training_rows(&config, &panel)?,
                panel.n_days()
            );
        }
        Command::Train => {
            let cell = single_cell(&cli, &config)?;
            let panel = load_panel(&config)?;
            let selection = select_factors(&config, &panel, cell.selection)?;
            let columns = selection.feature_columns(&panel);
            let data = make_windows(&panel, &columns, config.model.window_len)?;
            let (train_set, _) = chrono_split(&data, config.split.train_fraction)?;
            let model_config = config.model.model_config(cell.architecture, cell.loss, columns.len());
            let model = train(&model_config, &train_set)?;
            let mut out = String::from("epoch\tloss\n");
            for (i, l) in model.training_loss_history.iter().enumerate() {
                let _ = writeln!(out, "{}\t{l}", i + 1);
            }
            print!("{out}");
            let dir = out_dir.join(cell.slug());
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            save_forecaster(&model, dir.join("model.txt"))?;
            write_file(&dir.join("selection.json"), &selection.to_json())?;
            eprintln!("{cell}: model written to {}", dir.join("model.txt").display());
        }
        Command::Backtest => {
            let cell = single_cell(&cli, &config)?;
            let panel = load_panel(&config)?;
            let artifacts = run_cell(&config, &panel, cell, None)?;
            let dir = out_dir.join(cell.slug());
            write_artifacts(&artifacts, &dir)?;
            print!("cell\t{cell}\n{}", artifacts.backtest.summary());
            eprintln!("{cell}: artifacts written to {}", dir.display());
        }
        Command::Grid => {
            let cells = parse_cells(cli.cells.as_deref().unwrap_or("all")).map_err(anyhow::Error::msg)?;
            let report = run_grid(&config, &cells, Some(&out_dir))?;
            print!("{}", report.to_tsv());
            eprint!("{}", report.to_table());
            let failed = report.rows.iter().filter(|r| !r.is_completed()).count();
            eprintln!("{} cells, {failed} failed; reports in {}", report.rows.len(), out_dir.display());
        }
    }
    Ok(())
}
