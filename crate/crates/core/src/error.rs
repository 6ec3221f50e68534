use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "no connected swarm found after {attempts} attempts (n = {n}, density = {density}/km², d_tr = {d_tr} m)"
    )]
    GenerationFailed {
        n: usize,
        density: f64,
        d_tr: f64,
        attempts: usize,
    },

    #[error("destroying {n_d} of {n} nodes never split the network in {attempts} attempts")]
    CnsUnobtainable {
        n: usize,
        n_d: usize,
        attempts: usize,
    },

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
