use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("singular solve: {0}")]
    SingularSolve(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("insufficient data: need at least {needed} events, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("switch detection failed: {0}")]
    DetectionFailure(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("preset error: {0}")]
    Preset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors that originate in bad numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::SingularSolve(_) | Error::Internal(_)
        )
    }

    /// True for errors caused by the data handed to an analysis routine.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Fit(_)
                | Error::InsufficientData { .. }
                | Error::DetectionFailure(_)
                | Error::Undefined(_)
                | Error::Io(_)
        )
    }
}
