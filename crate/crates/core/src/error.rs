use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: component {index} is not finite")]
    InvalidState { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration diverged (non-finite state) at step {step}")]
    Divergence { step: usize },

    #[error("trajectory too short: need at least {needed} rows, got {got}")]
    InsufficientLength { needed: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("degenerate recurrent matrix: raw spectral radius below 1e-12, reseed the reservoir")]
    DegenerateMatrix,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("singular system: gamma = 0 with rank-deficient features")]
    SingularSystem,

    #[error("non-finite loss at training step {step}")]
    TrainingDiverged { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
