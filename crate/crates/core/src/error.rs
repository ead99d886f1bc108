use thiserror::Error;

use crate::data::TradingDate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is singular: {0}")]
    SingularMatrix(String),
    #[error("matrix is not orthogonal (deviation {0:e})")]
    NotOrthogonal(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("no finite kappa reaches the requested exposure")]
    DegenerateExposure,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("density grid point {index} is not positive ({value})")]
    NonPositiveGridPoint { index: usize, value: f64 },
    #[error("insufficient history: need {needed} rows, panel has {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("singular covariance estimated for rebalance on {date}")]
    SingularCovariance { date: TradingDate },
    #[error("missing data on {date} for asset {asset}")]
    MissingData { date: TradingDate, asset: String },
    #[error("insufficient observations: need {needed}, have {available}")]
    InsufficientObservations { needed: usize, available: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("too few observations: need {needed}, have {available}")]
    TooFewObservations { needed: usize, available: usize },
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dates are not strictly increasing at line {line} ({date})")]
    NonMonotonicDates { line: usize, date: TradingDate },
    #[error("panel has no rows")]
    EmptyPanel,
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
