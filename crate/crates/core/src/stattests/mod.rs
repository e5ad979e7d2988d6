//! Unit-root, cointegration and correlation tests used for factor analysis.

mod adf;
mod correlation;
mod johansen;
pub mod tables;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;

pub use adf::{adf_test, AdfResult, LagSelection};
pub use correlation::pearson_correlation;
pub use johansen::{johansen_pairwise, johansen_pairwise_with, JohansenResult};
pub use tables::{TableError, Tables};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatError {
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),
    #[error("singular moment matrix: {0}")]
    SingularMomentMatrix(String),
    #[error("series contain non-finite values")]
    NonFinite,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Deterministic terms in the ADF test regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    NoConstant,
    #[default]
    Constant,
    ConstantTrend,
}

impl RegressionKind {
    pub(crate) fn table_key(self) -> &'static str {
        match self {
            RegressionKind::NoConstant => "none",
            RegressionKind::Constant => "constant",
            RegressionKind::ConstantTrend => "constant_trend",
        }
    }

    fn n_trend(self) -> usize {
        match self {
            RegressionKind::NoConstant => 0,
            RegressionKind::Constant => 1,
            RegressionKind::ConstantTrend => 2,
        }
    }
}

/// Deterministic specification of the Johansen VECM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deterministic {
    /// Constant confined to the cointegrating relation.
    #[default]
    RestrictedConstant,
    /// Constant in the VAR (drift in the levels).
    UnrestrictedConstant,
}

impl Deterministic {
    pub(crate) fn table_key(self) -> &'static str {
        match self {
            Deterministic::RestrictedConstant => "restricted_constant",
            Deterministic::UnrestrictedConstant => "unrestricted_constant",
        }
    }
}
