use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("integrand not resolved at the box boundary: edge/max = {ratio:.3e} exceeds {tol:.1e}")]
    TailNotResolved { ratio: f64, tol: f64 },
    #[error("matrix is not symmetric: max asymmetry {0:.3e}")]
    NotSymmetric(f64),
    #[error("supplied and spectral derivatives disagree by {0:.3e}")]
    DerivativeMismatch(f64),
    #[error("invalid evolution coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("backward evolution of a dissipative equation (a > 0, t < 0) is ill-posed")]
    BackwardParabolic,
    #[error("operation requires a spatially constant matrix potential")]
    NonConstantPotential,
    #[error("fixed-point iteration did not converge: gap {gap:.3e} > tol {tol:.1e}")]
    NonConvergence { gap: f64, tol: f64 },
    #[error("unsupported nonlinearity: {0}")]
    UnsupportedNonlinearity(String),
    #[error("nonlinear flow blows up within the step")]
    BlowUp,
    #[error("unsupported weight: {0}")]
    UnsupportedWeight(String),
    #[error("operation requires a > 0")]
    DissipationRequired,
    #[error("resampled points leave the periodic box (scale {0:.4})")]
    ScaleOutOfBox(f64),
    #[error("time {t} outside the sampled range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("too few samples: {0}")]
    Unresolved(String),
    #[error("parameters not on the sharp threshold: alpha*beta - 4T = {0:.3e}")]
    OffThreshold(f64),
    #[error("expression error at byte {pos}: {msg}")]
    Expression { pos: usize, msg: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
