use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed JSON. `offset` is the byte offset of the failure.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    /// Too few points for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The input geometry makes the problem singular (e.g. all x equal).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Too few distinct values to split into two classes.
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("render error: {0}")]
    Render(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for command-line use: 2 when the input is valid
    /// but holds too little usable data, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InsufficientData(_) | Error::DegenerateGeometry(_) => 2,
            _ => 1,
        }
    }
}
