use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("search space contains no valid configuration")]
    InfeasibleSpace,

    /// No candidate satisfied the active constraints.
    #[error("infeasible: {message}")]
    Infeasible {
        message: String,
        /// Best infeasible point seen, when one was evaluated.
        best_point: Option<Vec<i64>>,
    },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("data error: {0}")]
    Data(String),

    /// A model required by the requested operation has not been fitted or loaded.
    #[error("model state error: {0}")]
    State(String),

    #[error("search space too large for exhaustive search: {size} configurations (limit {limit})")]
    TooLarge { size: String, limit: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn infeasible(message: impl Into<String>, best_point: Option<Vec<i64>>) -> Self {
        Error::Infeasible {
            message: message.into(),
            best_point,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. } | Error::InfeasibleSpace => 2,
            Error::Domain(_) | Error::TooLarge { .. } => 1,
            Error::Fit(_)
            | Error::Data(_)
            | Error::State(_)
            | Error::Io { .. }
            | Error::Json(_) => 3,
        }
    }
}
