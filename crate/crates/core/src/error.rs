use thiserror::Error;

/// Errors raised by the analysis and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown builtin system `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid parameters for `{name}`: {reason}")]
    InvalidParams { name: String, reason: String },
    #[error("subcharacteristic condition violated: lambda = {lambda} must exceed |a| = {a}")]
    Subcharacteristic { lambda: f64, a: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("structural hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("ill-conditioned matrix (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("Schur iteration did not converge")]
    NoConvergence,
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("non-positive sample {value:e} at t = {t}")]
    NonPositiveSample { t: f64, value: f64 },
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("cutoff too large: {0}")]
    CutoffTooLarge(String),
    #[error("solution blew up at t = {t}: sup norm {sup:e} exceeds {limit:e}")]
    BlowUp { t: f64, sup: f64, limit: f64 },
    #[error("time step {dt} violates the stability bound {bound}")]
    TimeStep { dt: f64, bound: f64 },
    #[error("system has no nonlinearity attached")]
    MissingNonlinearity,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
