//! Price ingestion, calendar alignment, returns, windows and splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed price file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("no usable rows in {path}")]
    EmptyData { path: PathBuf },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("alignment failed: {0}")]
    Alignment(String),
    #[error("series {0} has no observed values")]
    DegenerateSeries(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: need more than {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid split: {0}")]
    Split(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Cells that mark a missing close price.
const GAP_MARKERS: [&str; 3] = ["null", "nan", ""];

/// One ticker's dated close prices. `None` marks a gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries<T> {
    ticker: String,
    dates: Vec<NaiveDate>,
    close: Vec<Option<T>>,
}

impl<T: Scalar> PriceSeries<T> {
    pub fn new(ticker: impl Into<String>, dates: Vec<NaiveDate>, close: Vec<Option<T>>) -> Result<Self, DataError> {
        let ticker = ticker.into();
        if dates.len() != close.len() {
            return Err(DataError::InvalidSeries(format!(
                "{ticker}: {} dates but {} prices",
                dates.len(),
                close.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(DataError::InvalidSeries(format!(
                "{ticker}: dates not strictly increasing at {}",
                w[1]
            )));
        }
        if close.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::InvalidSeries(format!("{ticker}: non-finite price")));
        }
        Ok(Self { ticker, dates, close })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn close(&self) -> &[Option<T>] {
        &self.close
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.close.iter().filter(|v| v.is_none()).count()
    }

    /// Rows whose date lies in `[start, end]`; open bounds when `None`.
    pub fn within(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> Self {
        let keep = |d: &NaiveDate| start.map_or(true, |s| *d >= s) && end.map_or(true, |e| *d <= e);
        let (dates, close) = self
            .dates
            .iter()
            .zip(&self.close)
            .filter(|(d, _)| keep(d))
            .map(|(d, c)| (*d, *c))
            .unzip();
        Self { ticker: self.ticker.clone(), dates, close }
    }
}

fn parse_date(cell: &str) -> Option<NaiveDate> {
    let cell = cell.trim();
    NaiveDate::parse_from_str(cell, "%Y-%m-%d")
        .ok()
        // ISO-8601 timestamps: the calendar date is the leading YYYY-MM-DD.
        .or_else(|| cell.get(..10).and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok()))
}

fn parse_close<T: Scalar>(cell: &str) -> Option<T> {
    let cell = cell.trim();
    if GAP_MARKERS.iter().any(|m| cell.eq_ignore_ascii_case(m)) {
        return None;
    }
    cell.parse::<T>().ok().filter(|v| v.is_finite())
}

/// Reads a `Date`/`Close` CSV (other columns ignored). The ticker is the file
/// stem; rows are returned in date order whatever the file order.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<PriceSeries<T>, DataError> {
    let path = path.as_ref();
    let format = |reason: String| DataError::Format { path: path.to_path_buf(), reason };
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| format(e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| format(format!("missing {name} column")))
    };
    let (date_col, close_col) = (column("Date")?, column("Close")?);

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format(e.to_string()))?;
        let date_cell = record.get(date_col).unwrap_or("");
        let date = parse_date(date_cell).ok_or_else(|| format(format!("row {}: bad date {date_cell:?}", i + 2)))?;
        rows.push((date, parse_close::<T>(record.get(close_col).unwrap_or(""))));
    }
    if rows.iter().all(|(_, c)| c.is_none()) {
        return Err(DataError::EmptyData { path: path.to_path_buf() });
    }
    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(format(format!("duplicate date {}", w[0].0)));
    }
    let ticker = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series").to_string();
    let (dates, close) = rows.into_iter().unzip();
    PriceSeries::new(ticker, dates, close)
}

/// Writes a two-column `Date,Close` CSV; gaps are written as `null`.
pub fn write_csv<T: Scalar>(series: &PriceSeries<T>, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let io = |e: csv::Error| DataError::Format { path: path.to_path_buf(), reason: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["Date", "Close"]).map_err(io)?;
    for (d, c) in series.dates.iter().zip(&series.close) {
        let value = c.map_or_else(|| "null".to_string(), |v| v.to_string());
        w.write_record([d.to_string(), value]).map_err(io)?;
    }
    w.flush().map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// Which dates make up the aligned calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalendarPolicy {
    /// Dates present in every series.
    #[default]
    Intersection,
    /// Dates present in any series; absent dates become gaps.
    Union,
}

/// Fills gaps: linear interpolation between the nearest observed neighbours,
/// nearest-observation carry before the first and after the last observation.
/// Returns `None` if nothing is observed.
pub fn fill_gaps<T: Scalar>(values: &[Option<T>]) -> Option<Vec<T>> {
    let observed: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let (&first, &last) = (observed.first()?, observed.last()?);
    let mut out: Vec<T> = values.iter().map(|v| v.unwrap_or_else(T::nan)).collect();
    let (head, tail) = (values[first].expect("observed"), values[last].expect("observed"));
    out[..first].iter_mut().for_each(|v| *v = head);
    out[last + 1..].iter_mut().for_each(|v| *v = tail);
    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (values[a].expect("observed"), values[b].expect("observed"));
        let span = T::from_usize_lossy(b - a);
        for (i, slot) in out.iter_mut().enumerate().take(b).skip(a + 1) {
            let w = T::from_usize_lossy(i - a) / span;
            *slot = va + (vb - va) * w;
        }
    }
    Some(out)
}

/// Date-aligned, gap-free matrix of close prices (rows are days).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPanel<T> {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    values: Matrix<T>,
    target_index: usize,
}

impl<T: Scalar> AlignedPanel<T> {
    /// Builds a panel from per-ticker columns, validating every invariant.
    pub fn from_columns(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        columns: &[Vec<T>],
        target_index: usize,
    ) -> Result<Self, DataError> {
        if tickers.len() != columns.len() {
            return Err(DataError::InvalidArgument("one ticker per column required".into()));
        }
        if target_index >= tickers.len() {
            return Err(DataError::InvalidArgument(format!("target index {target_index} out of range")));
        }
        if columns.iter().any(|c| c.len() != dates.len()) {
            return Err(DataError::InvalidArgument("column length differs from calendar".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DataError::InvalidArgument("dates not strictly increasing".into()));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::InvalidArgument("non-finite panel value".into()));
        }
        let refs: Vec<&[T]> = columns.iter().map(Vec::as_slice).collect();
        let values = Matrix::from_columns(&refs).map_err(|e| DataError::InvalidArgument(e.to_string()))?;
        let values = if columns.is_empty() { Matrix::zeros(dates.len(), 0) } else { values };
        Ok(Self { dates, tickers, values, target_index })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target_ticker(&self) -> &str {
        &self.tickers[self.target_index]
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.tickers.len()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.values.column(j)
    }

    pub fn column_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    /// Non-target column indices in input order.
    pub fn candidate_indices(&self) -> Vec<usize> {
        (0..self.n_series()).filter(|&j| j != self.target_index).collect()
    }

    /// The first `rows` days.
    pub fn head(&self, rows: usize) -> Self {
        let rows = rows.min(self.n_days());
        Self {
            dates: self.dates[..rows].to_vec(),
            tickers: self.tickers.clone(),
            values: Matrix::from_fn(rows, self.n_series(), |i, j| self.values[(i, j)]),
            target_index: self.target_index,
        }
    }

    /// Writes `Date,<ticker>...` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        let err = |e: csv::Error| DataError::Format { path: path.to_path_buf(), reason: e.to_string() };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let mut header = vec!["Date".to_string()];
        header.extend(self.tickers.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut row = vec![d.to_string()];
            row.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|source| DataError::Io { path: path.to_path_buf(), source })
    }
}

/// Aligns series on a common calendar and fills every gap.
pub fn align_and_interpolate<T: Scalar>(
    series: &[PriceSeries<T>],
    target: &str,
    policy: CalendarPolicy,
) -> Result<AlignedPanel<T>, DataError> {
    if series.len() < 2 {
        return Err(DataError::Alignment(format!("need at least 2 series, got {}", series.len())));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = series.iter().find(|s| !seen.insert(s.ticker())) {
        return Err(DataError::Alignment(format!("duplicate ticker {}", dup.ticker())));
    }
    let target_index = series
        .iter()
        .position(|s| s.ticker() == target)
        .ok_or_else(|| DataError::Alignment(format!("target {target} not among the series")))?;

    let calendar: BTreeSet<NaiveDate> = match policy {
        CalendarPolicy::Intersection => {
            let mut it = series.iter().map(|s| s.dates.iter().copied().collect::<BTreeSet<_>>());
            let first = it.next().unwrap_or_default();
            it.fold(first, |acc, s| acc.intersection(&s).copied().collect())
        }
        CalendarPolicy::Union => series.iter().flat_map(|s| s.dates.iter().copied()).collect(),
    };
    if calendar.is_empty() {
        return Err(DataError::Alignment("series share no dates".into()));
    }
    let dates: Vec<NaiveDate> = calendar.into_iter().collect();

    let mut columns = Vec::with_capacity(series.len());
    for s in series {
        let by_date: BTreeMap<NaiveDate, Option<T>> = s.dates.iter().copied().zip(s.close.iter().copied()).collect();
        let raw: Vec<Option<T>> = dates.iter().map(|d| by_date.get(d).copied().flatten()).collect();
        columns.push(fill_gaps(&raw).ok_or_else(|| DataError::DegenerateSeries(s.ticker().to_string()))?);
    }
    let tickers = series.iter().map(|s| s.ticker().to_string()).collect();
    AlignedPanel::from_columns(dates, tickers, &columns, target_index)
}

/// Consecutive-day log returns `ln(P_{n+1} / P_n)` of one panel column.
pub fn log_returns<T: Scalar>(panel: &AlignedPanel<T>, column: usize) -> Result<Vec<T>, DataError> {
    if column >= panel.n_series() {
        return Err(DataError::InvalidArgument(format!("column {column} out of range")));
    }
    let prices = panel.column(column);
    log_returns_of(&prices)
}

pub(crate) fn log_returns_of<T: Scalar>(prices: &[T]) -> Result<Vec<T>, DataError> {
    if let Some(p) = prices.iter().find(|p| !(**p > T::zero())) {
        return Err(DataError::Domain(format!("non-positive price {p}")));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Supervised samples: each input is the `window_len × p` slice of the
/// feature columns preceding the target day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset<T> {
    pub inputs: Vec<Matrix<T>>,
    /// Target price on the sample date.
    pub targets: Vec<T>,
    pub sample_dates: Vec<NaiveDate>,
    /// Target price on the last day of the input window.
    pub previous_targets: Vec<T>,
    pub feature_tickers: Vec<String>,
    pub window_len: usize,
}

impl<T: Scalar> WindowedDataset<T> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_tickers.len()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            inputs: self.inputs[range.clone()].to_vec(),
            targets: self.targets[range.clone()].to_vec(),
            sample_dates: self.sample_dates[range.clone()].to_vec(),
            previous_targets: self.previous_targets[range].to_vec(),
            feature_tickers: self.feature_tickers.clone(),
            window_len: self.window_len,
        }
    }
}

pub const DEFAULT_WINDOW_LEN: usize = 5;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

pub fn make_windows<T: Scalar>(
    panel: &AlignedPanel<T>,
    feature_columns: &[usize],
    window_len: usize,
) -> Result<WindowedDataset<T>, DataError> {
    if window_len == 0 {
        return Err(DataError::InvalidArgument("window length must be at least 1".into()));
    }
    if feature_columns.is_empty() {
        return Err(DataError::InvalidArgument("no feature columns".into()));
    }
    if let Some(c) = feature_columns.iter().find(|&&c| c >= panel.n_series()) {
        return Err(DataError::InvalidArgument(format!("feature column {c} out of range")));
    }
    let days = panel.n_days();
    if window_len >= days {
        return Err(DataError::InsufficientData { needed: window_len, got: days });
    }
    let values = panel.values();
    let target = panel.target_index();
    let mut ds = WindowedDataset {
        inputs: Vec::with_capacity(days - window_len),
        targets: Vec::with_capacity(days - window_len),
        sample_dates: Vec::with_capacity(days - window_len),
        previous_targets: Vec::with_capacity(days - window_len),
        feature_tickers: feature_columns.iter().map(|&c| panel.tickers()[c].clone()).collect(),
        window_len,
    };
    for d in window_len..days {
        ds.inputs.push(Matrix::from_fn(window_len, feature_columns.len(), |i, j| {
            values[(d - window_len + i, feature_columns[j])]
        }));
        ds.targets.push(values[(d, target)]);
        ds.previous_targets.push(values[(d - 1, target)]);
        ds.sample_dates.push(panel.dates()[d]);
    }
    Ok(ds)
}

/// Size of the training side for `n` samples.
pub fn train_size(n: usize, train_fraction: f64) -> Result<usize, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Split(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    // Guard against products like 0.29 * 100 = 28.999999999999996.
    let n_train = (train_fraction * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(DataError::Split(format!("fraction {train_fraction} of {n} samples leaves a side empty")));
    }
    Ok(n_train)
}

/// Chronological split: the first `floor(fraction · n)` samples train.
pub fn chrono_split<T: Scalar>(
    dataset: &WindowedDataset<T>,
    train_fraction: f64,
) -> Result<(WindowedDataset<T>, WindowedDataset<T>), DataError> {
    let n = dataset.len();
    let n_train = train_size(n, train_fraction)?;
    Ok((dataset.slice(0..n_train), dataset.slice(n_train..n)))
}
