use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input violates a documented precondition.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("coverage grid has no cells")]
    EmptyGrid,

    #[error("expected {expected} samples per sensor, got {got}")]
    SampleCount { expected: usize, got: usize },

    #[error("speed band calibration is infeasible: {0}")]
    InfeasibleCalibration(String),

    #[error("trace is empty")]
    EmptyTrace,

    #[error("scenario parse error: {0}")]
    Scenario(#[from] serde_json::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
