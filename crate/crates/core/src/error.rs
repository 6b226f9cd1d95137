use thiserror::Error;

/// Errors produced anywhere in the fitting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("no data rows")]
    NoData,

    #[error("row {row}: expected {expected} fields, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: field {field} is not a finite number: {text:?}")]
    ParseField {
        row: usize,
        field: usize,
        text: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("diameter undefined for fewer than two sites")]
    DiameterUndefined,

    #[error("unknown test function {0:?} (expected TF1..TF4)")]
    UnknownTestFunction(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sketch size {k} exceeds column count {n}")]
    SketchTooLarge { k: usize, n: usize },

    #[error("basis matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("degenerate degrees of freedom: n = {n}, rank = {rank}")]
    DegenerateDof { n: usize, rank: usize },

    #[error("decomposition failed: {0}")]
    Decomposition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
