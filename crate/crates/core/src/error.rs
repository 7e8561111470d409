use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameters outside the admissible window: {0}")]
    WindowViolation(String),
    #[error("singularity too strong: exponent {exponent} at {location}")]
    SingularityTooStrong { exponent: f64, location: f64 },
    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}, tolerance {tol:e}")]
    NonConvergent { estimate: f64, error: f64, tol: f64 },
    #[error("denominator vanishes")]
    ZeroDenominator,
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("positivity lost at node {0}")]
    PositivityLost(usize),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("unsupported support: {0}")]
    UnsupportedSupport(String),
}

pub type Result<T> = std::result::Result<T, Error>;
