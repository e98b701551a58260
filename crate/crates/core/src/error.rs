use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("gap {gap} not addable below current ground state: node at x = {x} (chain step {step})")]
    NodeCrossing { step: usize, gap: f64, x: f64 },

    #[error("grid too coarse for this potential: spacing {spacing} exceeds suggested {suggested}")]
    Resolution { spacing: f64, suggested: f64 },

    #[error("density of states is not positive at E = {energy}")]
    NonPositiveDensity { energy: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Validation failures are the caller's fault; everything else is a
    /// numerical or environment failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
