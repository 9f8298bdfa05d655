use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The schedule lies outside the range where the convergence bound applies.
    #[error("inadmissible schedule: T = {horizon} but T >= e^2/lambda = {required:.4} is required")]
    Inadmissible { horizon: usize, required: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },

    #[error("accumulator became non-positive at coordinate {coord} (iteration {iteration})")]
    NonPositiveAccumulator { coord: usize, iteration: usize },

    #[error("run aborted (seed {seed}, iteration {iteration}): {detail}")]
    RunAborted {
        seed: u64,
        iteration: usize,
        detail: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
