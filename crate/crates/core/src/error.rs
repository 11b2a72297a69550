use std::path::PathBuf;

/// Errors raised anywhere in the generation, probing and scoring stack.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file header or body.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    /// Values that parse but violate a declared invariant (NaN heatmaps, gains below one...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("input too small: {0}")]
    Undersized(String),

    /// The mask has no forged or no authentic pixel, so MCC is undefined.
    #[error("undefined mask: {0}")]
    UndefinedMask(String),

    #[error("no admissible region: {0}")]
    NoAdmissibleRegion(String),

    #[error("mask assignment error: {0}")]
    Assignment(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_width: left.0,
            left_height: left.1,
            right_width: right.0,
            right_height: right.1,
        }
    }
}
