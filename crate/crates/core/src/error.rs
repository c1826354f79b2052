use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum JacError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("lag count {xi} out of range for {n} antennas (need 1 <= xi <= N-1)")]
    LagOutOfRange { xi: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("arcsinc domain error: {0} is outside [0, 1]")]
    ArcsincDomain(f64),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    PowerIteration { iterations: usize, residual: f64 },

    #[error("Fisher information matrix is singular (condition number {condition:e})")]
    SingularFim { condition: f64 },

    #[error("non-finite gradient at iteration {iteration} (p1 = {p1:e})")]
    NonFiniteGradient { iteration: usize, p1: f64 },

    #[error("signal file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, JacError>;
