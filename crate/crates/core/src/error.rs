use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Fock truncation leaks {leakage:.3e} of probability (tolerance {tolerance:.1e})")]
    TruncationLeakage { leakage: f64, tolerance: f64 },

    #[error("normalization {value:.3e} too close to zero in {context}")]
    ZeroNormalization { context: &'static str, value: f64 },

    #[error("polynomial degree {degree} exceeds supported maximum {max}")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("covariance matrix is not positive definite (det = {det:.3e})")]
    NotPositiveDefinite { det: f64 },

    #[error("non-finite weight at record {index} of shard {shard}")]
    NonFiniteWeight { shard: u64, index: usize },

    #[error("Wronskian drift {drift:.3e} for irregular solution n = {n}")]
    WronskianDrift { n: usize, drift: f64 },

    #[error("oscillator recursion overflow: n = {n} at |x| = {x_max}")]
    RecursionOverflow { n: usize, x_max: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("tomography angles do not cover [0, pi) adequately: {0}")]
    AngleCoverage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed record file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage { stage: String, source: Box<Error> },
}

/// Coarse classification used by the command-line driver for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Statistics,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Stage { source, .. } => source.kind(),
            Error::InvalidParameter(_) | Error::Config(_) | Error::UnsupportedDegree { .. } => {
                ErrorKind::Config
            }
            Error::ZeroNormalization { .. }
            | Error::InsufficientData { .. }
            | Error::AngleCoverage(_) => ErrorKind::Statistics,
            Error::Io(_) | Error::Json(_) | Error::Format(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }

    /// Labels the pipeline stage an error came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
