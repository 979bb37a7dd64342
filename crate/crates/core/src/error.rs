use thiserror::Error;

/// Errors raised by the plasma toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("points {0} and {1} coincide (distance below 1e-14)")]
    CoincidentPoints(usize, usize),

    #[error("non-finite coordinate at index {0}")]
    NonFinitePoint(usize),

    #[error("density is negative ({value:.3e}) at ({x:.4}, {y:.4})")]
    NegativeDensity { x: f64, y: f64, value: f64 },

    #[error("laplacian mass is {0:.3e}, expected zero")]
    MassNotZero(f64),

    #[error("inverse temperature must be positive, got {0}")]
    NonPositiveBeta(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("chain is degenerate: acceptance rate {0:.4} after tuning")]
    DegenerateChain(f64),

    #[error("eigensolver failed (LAPACK info = {0})")]
    EigensolveFailure(i32),

    #[error("t = {t} outside the domain t < {limit}")]
    DomainError { t: f64, limit: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("test function has no gradient rule")]
    MissingGradient,

    #[error("dirichlet energy over the plane diverges (laplacian mass {0:.3e})")]
    DivergentEnergy(f64),

    #[error("importance weights degenerate: {0}")]
    EnvelopeMismatch(String),

    #[error("grid spacing {spacing} exceeds half the smoothing radius {eps}")]
    GridTooCoarse { spacing: f64, eps: f64 },

    #[error("field has no masked nodes")]
    EmptyField,

    #[error("smoothing scale {scale:.4e} too small: {reason}")]
    ScaleTooSmall { scale: f64, reason: String },

    #[error("need at least {needed} replicas, got {got}")]
    InsufficientReplicas { needed: usize, got: usize },

    #[error("covariance not positive definite after jitter {0:.1e}")]
    NotPsd(f64),

    #[error("exponential moment dominated by its largest samples")]
    HeavyTiltUntrusted,

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
