use thiserror::Error;

use crate::model::CtType;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("trajectory diverged at t = {t}: |z| = {radius:e} exceeds bound")]
    Diverged { t: f64, radius: f64 },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("feature column {column} has zero variance")]
    DegenerateFeature { column: usize },

    #[error("class {0} is absent from the training split")]
    MissingClass(CtType),

    #[error("feature vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("feature {feature} undefined at T = {t}")]
    UndefinedFeature { feature: &'static str, t: f64 },

    #[error("simulation budget exhausted: {0}")]
    Budget(String),

    #[error("{source_name}:{line}: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    /// Whether the error is a validation problem with user input, as opposed to
    /// an I/O failure or a numerical failure during computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::OutOfRange(_)
                | Error::MissingClass(_)
                | Error::LengthMismatch { .. }
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::NonFinite { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
