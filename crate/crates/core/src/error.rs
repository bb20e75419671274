use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum CdeError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("non-numeric value `{value}` in column `{column}` (row {row})")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("missing value in feature column `{column}` (row {row})")]
    MissingFeature { column: String, row: usize },

    #[error("no usable rows after removing missing responses")]
    NoUsableRows,

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("need at least {folds} groups for {folds}-fold splitting, found {groups}")]
    TooFewGroups { groups: usize, folds: usize },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {0} is outside the open unit interval")]
    OutsideUnitInterval(f64),

    #[error("objective became non-finite at step {step}")]
    Diverged { step: usize },

    #[error("unknown scenario model {0}")]
    UnknownModel(u8),
}

pub type Result<T> = std::result::Result<T, CdeError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CdeError {
    CdeError::InvalidArgument(msg.into())
}
