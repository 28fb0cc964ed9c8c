use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("sample too small: need at least {needed} rows, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("linear system is singular or ill-conditioned (condition number {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("model `{0}` does not have an affine score decomposition")]
    NotAffine(String),

    #[error("model `{model}` does not provide {what}")]
    Unsupported { model: String, what: &'static str },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors raised by a nuisance estimator (as opposed to bad input or I/O).
    pub fn is_estimation_failure(&self) -> bool {
        matches!(
            self,
            Error::Estimation(_) | Error::SingularSystem { .. } | Error::DegenerateSample(_)
        )
    }
}
