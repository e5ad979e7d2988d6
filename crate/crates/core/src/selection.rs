//! Factor selection: rank candidate series against the target and pick the
//! model's exogenous inputs.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::stattests::{johansen_pairwise, pearson_correlation, StatError};
use crate::timeseries::AlignedPanel;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("k = {k} must lie in 1..={candidates}")]
    InvalidK { k: usize, candidates: usize },
    #[error("only {rankable} rankable candidates, {needed} requested")]
    InsufficientCandidates { needed: usize, rankable: usize },
    #[error("testing {ticker}: {source}")]
    Test {
        ticker: String,
        #[source]
        source: StatError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    All,
    Correlation,
    Cointegration,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 3] = [Self::All, Self::Correlation, Self::Cointegration];

    /// Label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::All => "All",
            Self::Correlation => "Correlation",
            Self::Cointegration => "Cointegration",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMeaning {
    CorrelationCoefficient,
    CointegrationPValue,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFactor<T> {
    pub ticker: String,
    /// `None` for the all-factors method or when the score is undefined.
    pub score: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedFactor {
    pub ticker: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport<T> {
    pub method: SelectionMethod,
    pub target: String,
    pub ranked: Vec<RankedFactor<T>>,
    pub chosen: Vec<String>,
    pub k: usize,
    pub scores_meaning: ScoreMeaning,
    pub excluded: Vec<ExcludedFactor>,
}

impl<T: Scalar> SelectionReport<T> {
    /// Model input columns: the target's own history followed by the chosen
    /// companions in rank order.
    pub fn feature_columns(&self, panel: &AlignedPanel<T>) -> Vec<usize> {
        std::iter::once(panel.target_index())
            .chain(self.chosen.iter().filter_map(|t| panel.column_index(t)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("selection report serializes")
    }

    /// Tab-separated ranking table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# method\t{}\ttarget\t{}\tk\t{}", self.method.label(), self.target, self.k);
        let _ = writeln!(out, "rank\tticker\tscore\tchosen");
        for (i, f) in self.ranked.iter().enumerate() {
            let score = f.score.map_or_else(|| "-".to_string(), |s| format!("{:.6}", s.as_f64()));
            let chosen = if self.chosen.contains(&f.ticker) { "yes" } else { "no" };
            let _ = writeln!(out, "{}\t{}\t{}\t{}", i + 1, f.ticker, score, chosen);
        }
        for e in &self.excluded {
            let _ = writeln!(out, "-\t{}\texcluded: {}\tno", e.ticker, e.reason);
        }
        out
    }
}

fn check_k<T: Scalar>(panel: &AlignedPanel<T>, k: usize) -> Result<Vec<usize>, SelectionError> {
    let candidates = panel.candidate_indices();
    if k == 0 || k > candidates.len() {
        return Err(SelectionError::InvalidK { k, candidates: candidates.len() });
    }
    Ok(candidates)
}

/// Every non-target column, in input order.
pub fn select_all<T: Scalar>(panel: &AlignedPanel<T>) -> SelectionReport<T> {
    let ranked: Vec<RankedFactor<T>> = panel
        .candidate_indices()
        .into_iter()
        .map(|j| RankedFactor { ticker: panel.tickers()[j].clone(), score: None })
        .collect();
    SelectionReport {
        method: SelectionMethod::All,
        target: panel.target_ticker().to_string(),
        chosen: ranked.iter().map(|f| f.ticker.clone()).collect(),
        k: ranked.len(),
        ranked,
        scores_meaning: ScoreMeaning::None,
        excluded: Vec::new(),
    }
}

/// Top `k` candidates by Pearson correlation of price levels with the target.
/// Zero-variance candidates rank last with no score.
pub fn select_by_correlation<T: Scalar>(panel: &AlignedPanel<T>, k: usize) -> Result<SelectionReport<T>, SelectionError> {
    let candidates = check_k(panel, k)?;
    let target = panel.column(panel.target_index());
    let mut ranked: Vec<RankedFactor<T>> = candidates
        .iter()
        .map(|&j| RankedFactor {
            ticker: panel.tickers()[j].clone(),
            score: pearson_correlation(&target, &panel.column(j)).ok(),
        })
        .collect();
    // Stable: ties keep input order.
    ranked.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => y.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Equal),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(SelectionReport {
        method: SelectionMethod::Correlation,
        target: panel.target_ticker().to_string(),
        chosen: ranked.iter().take(k).map(|f| f.ticker.clone()).collect(),
        ranked,
        k,
        scores_meaning: ScoreMeaning::CorrelationCoefficient,
        excluded: Vec::new(),
    })
}

/// Top `k` candidates by ascending rank-0 p-value of the pairwise Johansen
/// trace test against the target. Candidates whose moment matrices are
/// singular are excluded and listed.
pub fn select_by_cointegration<T: Scalar>(
    panel: &AlignedPanel<T>,
    k: usize,
    lag_order: usize,
) -> Result<SelectionReport<T>, SelectionError> {
    let candidates = check_k(panel, k)?;
    let target = panel.column(panel.target_index());
    let outcomes: Vec<(usize, Result<T, StatError>)> = candidates
        .par_iter()
        .map(|&j| (j, johansen_pairwise(&target, &panel.column(j), lag_order).map(|r| r.rank0_p_value())))
        .collect();

    let mut ranked = Vec::new();
    let mut excluded = Vec::new();
    for (j, outcome) in outcomes {
        let ticker = panel.tickers()[j].clone();
        match outcome {
            Ok(p) => ranked.push(RankedFactor { ticker, score: Some(p) }),
            Err(e @ StatError::SingularMomentMatrix(_)) => {
                excluded.push(ExcludedFactor { ticker, reason: e.to_string() })
            }
            Err(source) => return Err(SelectionError::Test { ticker, source }),
        }
    }
    if ranked.len() < k {
        return Err(SelectionError::InsufficientCandidates { needed: k, rankable: ranked.len() });
    }
    ranked.sort_by(|a, b| {
        let (x, y) = (a.score.expect("scored"), b.score.expect("scored"));
        x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(SelectionReport {
        method: SelectionMethod::Cointegration,
        target: panel.target_ticker().to_string(),
        chosen: ranked.iter().take(k).map(|f| f.ticker.clone()).collect(),
        ranked,
        k,
        scores_meaning: ScoreMeaning::CointegrationPValue,
        excluded,
    })
}

/// Dispatches on `method`; `k` and `lag_order` are ignored for [`SelectionMethod::All`].
pub fn select<T: Scalar>(
    panel: &AlignedPanel<T>,
    method: SelectionMethod,
    k: usize,
    lag_order: usize,
) -> Result<SelectionReport<T>, SelectionError> {
    match method {
        SelectionMethod::All => Ok(select_all(panel)),
        SelectionMethod::Correlation => select_by_correlation(panel, k),
        SelectionMethod::Cointegration => select_by_cointegration(panel, k, lag_order),
    }
}
