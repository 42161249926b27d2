use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("medium is not C1 ({0}); ray tracing needs a continuous gradient")]
    NonSmoothMedium(&'static str),

    #[error("grid too coarse: h = {h:.4e} exceeds wavelength/{ppw} = {limit:.4e}")]
    GridTooCoarse { h: f64, ppw: f64, limit: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("solve failed for source {index}: {reason}")]
    Source { index: usize, reason: String },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
