use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation leakage {leakage:.3e} exceeds tolerance {tolerance:.3e} at cutoff {cutoff}")]
    Truncation {
        leakage: f64,
        tolerance: f64,
        cutoff: usize,
    },

    #[error("outside the physical domain: {0}")]
    Domain(String),

    #[error("non-physical density matrix: {0}")]
    NonPhysical(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations: {detail}")]
    Convergence { iterations: usize, detail: String },

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors raised by input validation rather than numerics or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Domain(_)
                | Error::NonPhysical(_)
                | Error::Schema { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            return Error::Io(std::io::Error::other(e.to_string()));
        }
        Error::Schema {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
