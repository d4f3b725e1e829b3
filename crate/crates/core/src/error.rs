use crate::lifted_sde::ExplosionReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncated integral did not converge: tail estimate {tail:e} exceeds tolerance {tolerance:e}")]
    Tail { tail: f64, tolerance: f64 },

    #[error("quadrature failed to reach tolerance: error estimate {estimate:e} after {intervals} subintervals")]
    Quadrature { estimate: f64, intervals: usize },

    #[error("lifted factors exploded at t = {} (step {})", .0.time, .0.step)]
    Explosion(Box<ExplosionReport>),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Picard iteration is not contracting after {iterations} iterations; try a smaller horizon")]
    NonContraction { iterations: usize },

    #[error("envelope minimization window did not converge at x = {x}")]
    EnvelopeWindow { x: f64 },

    #[error("argument out of supported range: {0}")]
    Range(String),

    #[error("missing data: {0}")]
    Missing(String),
}
