use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("boundary region for tag `{tag}` matched no boundary edges")]
    NoMatch { tag: String },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("level set step {iteration} failed: {source}")]
    StepFailure {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("candidate run failed at iteration {iteration}: {source}")]
    CandidateFailure {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate sensitivity for objective {objective}: normalization factor is not finite")]
    DegenerateSensitivity { objective: usize },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("all candidates failed at refinement level {level}")]
    AllCandidatesFailed { level: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
