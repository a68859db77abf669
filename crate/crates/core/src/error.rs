use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad index, mismatched sizes).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid run or analysis configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The data cannot support the requested fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no crossing in window: {0}")]
    NoCrossing(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
