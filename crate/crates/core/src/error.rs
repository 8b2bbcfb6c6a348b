use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry outside bounds: {0}")]
    GeometryBounds(String),

    #[error("year {0} has no samples")]
    EmptyYear(i32),

    #[error("year {year} has {count} samples, at least {min} are required")]
    TooFewSamples { year: i32, count: usize, min: usize },

    #[error("degenerate sample set for year {year}: zero variance in {dimension}")]
    DegenerateSamples { year: i32, dimension: &'static str },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("frequency grid mismatch: {0}")]
    GridMismatch(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("bundle version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: String, expected: String },

    #[error("bundle checksum mismatch")]
    ChecksumMismatch,

    #[error("no feasible design found: {0}")]
    Infeasible(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
