use thiserror::Error;

/// Process exit codes.
///
/// | code | meaning |
/// |------|---------|
/// | 0 | success |
/// | 2 | bad flags, bad config file, invalid parameter |
/// | 3 | file could not be read or written |
/// | 4 | malformed input data (parse error, unordered dates, empty or missing data) |
/// | 5 | numerical failure (singular or non-positive-definite matrix, zero variance) |
/// | 6 | not enough history or observations |
/// | 7 | inputs of mismatched dimensions or lengths |
pub mod code {
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const DATA: i32 = 4;
    pub const NUMERICAL: i32 = 5;
    pub const HISTORY: i32 = 6;
    pub const DIMENSION: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] eqdrift::Error),
    #[error("{0}")]
    Usage(String),
    #[error("config file line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use eqdrift::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } => code::USAGE,
            CliError::Io { .. } => code::IO,
            CliError::Core(e) => match e {
                E::InvalidParameter(_) | E::NonPositiveGridPoint { .. } => code::USAGE,
                E::Io(_) => code::IO,
                E::Parse { .. }
                | E::NonMonotonicDates { .. }
                | E::EmptyPanel
                | E::MissingData { .. } => code::DATA,
                E::NotPositiveDefinite(_)
                | E::NotSymmetric(_)
                | E::SingularMatrix(_)
                | E::NotOrthogonal(_)
                | E::NonFinite
                | E::DegenerateExposure
                | E::SingularCovariance { .. }
                | E::ZeroVariance => code::NUMERICAL,
                E::InsufficientHistory { .. }
                | E::InsufficientObservations { .. }
                | E::TooFewObservations { .. } => code::HISTORY,
                E::DimensionMismatch { .. } | E::LengthMismatch { .. } => code::DIMENSION,
            },
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
