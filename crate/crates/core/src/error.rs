use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("numeric domain error: {0}")]
    Domain(String),

    /// The supplied correlation matrix has an eigenvalue below the jitter tolerance.
    #[error("not a covariance matrix: {0}")]
    NotCovariance(String),

    /// The channel memory exceeds what the single-previous-symbol ISI model supports.
    #[error("unsupported regime: max delay {max_delay} exceeds N - L = {limit}")]
    UnsupportedRegime { max_delay: usize, limit: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::InvalidDimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
