use thiserror::Error;

/// Errors raised by the estimators, samplers and pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("design matrix is rank deficient: rank {rank} < {cols} columns")]
    Singular { rank: usize, cols: usize },

    #[error("column {column} of the design has zero norm")]
    DegenerateColumn { column: usize },

    #[error("restriction is degenerate: R (X'X)^-1 R' is singular")]
    DegenerateRestriction,

    #[error("restriction has no rows")]
    EmptyRestriction,

    #[error("joint covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    MomentInconsistency { min_eigenvalue: f64 },

    #[error("risk moment must be positive, got {0}")]
    InvalidRiskMoment(f64),

    #[error("inverse moment of chi-square with {0} degrees of freedom diverges (need k >= 3)")]
    DivergentMoment(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },

    #[error("cannot parse {value:?} at row {row}, column {column}")]
    Parse { row: usize, column: String, value: String },

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("column {0:?} is constant; correlation undefined")]
    ConstantColumn(String),

    #[error("bootstrap gave up after {redraws} rank-deficient resamples")]
    BootstrapExhausted { redraws: usize },

    #[error("sweep cell {cell}: {source}")]
    Cell { cell: usize, source: Box<Error> },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
