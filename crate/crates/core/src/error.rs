use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("malformed quarter `{0}` (expected YYYY-Qn)")]
    MalformedPeriod(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("empty estimation sample")]
    EmptySample,

    #[error("rank-deficient regressors; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("underidentified: {instruments} instruments for {coefficients} coefficients")]
    Underidentified { instruments: usize, coefficients: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("every bootstrap replication was explosive and discarded")]
    BandFailure,

    #[error("explosive configuration: {0}")]
    Explosive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
