use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite function value at finite-difference probe (coordinate {index})")]
    InvalidProbe { index: usize },

    #[error("non-finite derivative at t = {t}, state index {index}")]
    Integration { t: f64, index: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate importance weights: {0}")]
    DegenerateWeights(&'static str),

    #[error("non-finite gradient entry {index} at optimizer step {step}")]
    NonFiniteGradient { step: u64, index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}
