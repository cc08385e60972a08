use thiserror::Error;

/// Errors produced by targets, kernels, tuners and the experiment front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A potential or gradient evaluation returned NaN or infinity.
    #[error("non-finite state encountered during integration")]
    NonFiniteState,

    /// The principal axis is undefined because the CCIPCA vector is still zero.
    #[error("principal axis undefined: |w| = 0")]
    UndefinedAxis,

    #[error("series too short: need at least {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    /// The tuner produced a non-finite value; the snapshot is a JSON dump of its state.
    #[error("adaptation aborted at iteration {iteration}: {reason}")]
    Aborted {
        iteration: usize,
        reason: String,
        snapshot: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 1 for configuration problems, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
