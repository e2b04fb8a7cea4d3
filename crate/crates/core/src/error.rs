use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps (size {size})")]
    EigNonConvergence { sweeps: usize, size: usize },

    #[error("eigenvector basis too ill-conditioned (kappa ~ {kappa:.3e}); use the exponential-specific path for f = exp")]
    IllConditionedEigenvectors { kappa: f64 },

    #[error("overflow while squaring in the matrix exponential (scaling power {scaling_power})")]
    ExpmOverflow { scaling_power: u32 },

    #[error("node {index} (value {value}) makes the resolvent singular or collides with another node")]
    BadNode { index: usize, value: num_complex::Complex64 },

    #[error("derivative of order {order} is not available for this function")]
    MissingDerivative { order: usize },

    #[error("Krylov iteration already broke down at step {step}")]
    AfterBreakdown { step: usize },

    #[error("orthonormalized basis has degenerated (tau_{index} = {tau:.3e})")]
    DegenerateBasis { index: usize, tau: f64 },

    #[error("state mismatch: {0}")]
    StateMismatch(String),

    #[error("superdiagonal entry {index} is zero")]
    ZeroSuperdiagonal { index: usize },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
