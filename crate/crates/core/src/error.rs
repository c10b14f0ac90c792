use thiserror::Error;

/// Errors raised across the estimation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unbalanced panel: {0}")]
    UnbalancedPanel(String),

    #[error("missing cell: unit `{unit}` period `{period}`")]
    MissingCell { unit: String, period: String },

    #[error("non-block treatment: {0}")]
    NonBlockTreatment(String),

    #[error("non-numeric value `{value}` in column `{column}` (row {row})")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank-deficient factor matrix")]
    RankDeficient,

    #[error("loadings cross-product is singular")]
    SingularLoadings,

    #[error("requested {k} factors from a {rows}x{cols} matrix")]
    TooManyFactors { k: usize, rows: usize, cols: usize },

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("under-identified: {0}")]
    UnderIdentified(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("placebo test aborted: {failures} of {attempts} estimator runs failed")]
    InferenceAborted { failures: usize, attempts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
