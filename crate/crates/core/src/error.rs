//! Error types shared across the toolkit.

use thiserror::Error;

/// Crate-wide error type. Variants follow the failure classes of the
/// pipeline stages so CLI diagnostics can name the stage that failed.
#[derive(Debug, Error)]
pub enum Error {
    /// Missing or corrupt dataset files; the message names the offending path.
    #[error("load error: {0}")]
    Load(String),

    /// Unknown ids, unresolvable references, invalid config files.
    #[error("configuration error: {0}")]
    Config(String),

    /// Parameter out of range or inconsistent arguments.
    #[error("argument error: {0}")]
    Argument(String),

    /// Attack-stage failure (e.g. surrogate divergence), with diagnostics.
    #[error("attack error: {0}")]
    Attack(String),

    /// Training failure (e.g. non-finite loss).
    #[error("training error: {0}")]
    Training(String),

    /// Defense scoring failure (e.g. empty reference class).
    #[error("scoring error: {0}")]
    Scoring(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
