use thiserror::Error;

use crate::dynamics::State;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal error: {0}")]
    Internal(String),

    /// A path produced non-finite values or exceeded the H¹ blow-up threshold.
    /// The last finite state is kept so diagnostics can be flushed.
    #[error("blow-up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        last_valid: Box<State>,
    },

    #[error("quadrature accuracy: {0}")]
    Accuracy(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite, got {value}"))
    }
}
