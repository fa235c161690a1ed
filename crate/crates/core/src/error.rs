use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("matrix is not a rotation: {0}")]
    NotARotation(String),

    #[error("underdetermined alignment: {0} point pairs, need at least 3")]
    Underdetermined(usize),

    #[error("degenerate point configuration (cross-covariance rank <= 1)")]
    Degenerate,

    #[error("insufficient inliers: effective weight {0:.6} < 3")]
    InsufficientInliers(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numbers rather than by the caller or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate
                | Error::Underdetermined(_)
                | Error::InsufficientInliers(_)
                | Error::NonFinite(_)
                | Error::NotARotation(_)
        )
    }

    /// Short stable code used when a failed trial is written to a CSV row.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "E_INVALID_ARGUMENT",
            Error::ShapeMismatch(_) => "E_SHAPE",
            Error::EmptyCloud => "E_EMPTY",
            Error::NotARotation(_) => "E_NOT_ROTATION",
            Error::Underdetermined(_) => "E_UNDERDETERMINED",
            Error::Degenerate => "E_DEGENERATE",
            Error::InsufficientInliers(_) => "E_INSUFFICIENT_INLIERS",
            Error::NonFinite(_) => "E_NON_FINITE",
            Error::Parse { .. } => "E_PARSE",
            Error::Io { .. } => "E_IO",
        }
    }
}
