use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the analysis engine and its file boundary.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-uniform sampling: {0}")]
    Sampling(String),
    #[error("bad data: {0}")]
    Data(String),
    #[error("series too short: {len} observations, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("misaligned inputs: {0}")]
    Alignment(String),
    #[error("duplicate series name `{0}`")]
    Name(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("weights do not cover the panel: {0}")]
    Coverage(String),
    #[error("invalid scale grid: {0}")]
    Scale(String),
    #[error("input too large for the direct transform: n = {n}, limit {limit}")]
    Size { n: usize, limit: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error class, used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Numeric => "numeric",
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Scale(_) | Error::Size { .. } => ErrorClass::Config,
            Error::Sampling(_)
            | Error::Data(_)
            | Error::TooShort { .. }
            | Error::Alignment(_)
            | Error::Name(_)
            | Error::Coverage(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
            Error::Domain(_) | Error::Degenerate(_) => ErrorClass::Numeric,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Sampling(_) => "SamplingError",
            Error::Data(_) => "DataError",
            Error::TooShort { .. } => "TooShort",
            Error::Alignment(_) => "AlignmentError",
            Error::Name(_) => "NameError",
            Error::Domain(_) => "DomainError",
            Error::Coverage(_) => "CoverageError",
            Error::Scale(_) => "ScaleError",
            Error::Size { .. } => "SizeError",
            Error::Degenerate(_) => "DegenerateError",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
