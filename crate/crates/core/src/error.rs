use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid composition in row {row}: {reason}")]
    InvalidComposition { row: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("unknown vertex identifier {0:?}")]
    UnknownVertex(String),

    #[error("duplicate vertex identifier {0:?}")]
    DuplicateVertex(String),

    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series for V_n({w}) did not converge within {terms} terms")]
    SeriesNotConverged { w: usize, terms: usize },

    #[error("non-positive posterior rate b* = {b_star} for cluster of size {size}")]
    NonPositiveRate { b_star: f64, size: usize },

    #[error("non-finite log-likelihood for observation {observation} in draw {draw}")]
    NonFiniteLikelihood { observation: usize, draw: usize },

    #[error("empty trace")]
    EmptyTrace,

    #[error("at least {needed} replicates required, got {got}")]
    TooFewReplicates { needed: usize, got: usize },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerics (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite(_)
            | Error::SeriesNotConverged { .. }
            | Error::NonPositiveRate { .. }
            | Error::NonFiniteLikelihood { .. } => true,
            Error::AtIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
