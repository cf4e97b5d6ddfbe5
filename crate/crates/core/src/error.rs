use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at {location}: {message}")]
    Malformed { location: String, message: String },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("duplicate utt_id {0:?}")]
    DuplicateUtterance(String),

    #[error("non-finite value in vector of utterance {0:?}")]
    NonFiniteVector(String),

    #[error("zero-norm vector for utterance {0:?}")]
    ZeroNorm(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("silhouette undefined: {0}")]
    SilhouetteUndefined(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("speaker {0:?} appears in more than one split")]
    SplitLeakage(String),

    #[error("no contrastive tuples could be mined ({0})")]
    NoTuples(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Malformed {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFiniteGradient(_) | Error::Numerical(_))
    }
}
