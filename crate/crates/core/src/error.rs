use thiserror::Error;

/// Errors raised by the solvers and model constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An iterative routine failed to meet its tolerance.
    #[error("numeric failure in {context}: {detail} (residual {residual:e})")]
    NumericFailure {
        context: String,
        detail: String,
        residual: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(context: impl Into<String>, detail: impl Into<String>, residual: f64) -> Self {
        Error::NumericFailure {
            context: context.into(),
            detail: detail.into(),
            residual,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NumericFailure { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
