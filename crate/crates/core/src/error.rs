use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("construction error: {0}")]
    Construction(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index {index} out of bounds for ambient dimension {dim}")]
    IndexOutOfBounds { index: usize, dim: usize },

    #[error("dataset has no latent targets")]
    MissingTargets,

    #[error("matrix is not a principal submatrix of the larger matrix")]
    NotPrincipalSubmatrix,

    #[error("objective diverged (non-finite) after {iterations} iterations")]
    Divergence { iterations: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("at alpha={alpha}, n_sup={n_sup}, trial={trial}, p={p}: {source}")]
    Sweep {
        alpha: f64,
        n_sup: usize,
        trial: usize,
        p: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The innermost error, skipping sweep context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sweep { source, .. } => source.root(),
            other => other,
        }
    }
}
