//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Gram matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularGram { condition: f64 },

    #[error("Gram matrix invalid: {0}")]
    InvalidGram(String),

    #[error("whitening undefined: A G^-1 A^H is rank deficient ({0})")]
    WhiteningUndefined(String),

    #[error("least-squares symbol stage: selected columns are rank deficient")]
    LeastSquaresSingular,

    #[error("MMSE symbol stage: statistic covariance is singular")]
    MmseSingular,

    #[error("coherence undefined for a single-column matrix")]
    UndefinedCoherence,

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix columns are not unit norm (column {column}, norm {norm})")]
    NotUnitNorm { column: usize, norm: f64 },

    #[error("exhaustive search refused: N = {n} exceeds the cap {max_n}")]
    ExhaustiveSearchTooLarge { n: usize, max_n: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("detector spec invalid: {0}")]
    DetectorSpec(String),
}

impl Error {
    pub fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
