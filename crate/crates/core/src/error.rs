use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "spectral density is not bounded away from zero (minimum {min:.3e} on the check grid)"
    )]
    Positivity { min: f64 },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("frequency grid of size {grid} is too coarse, need at least {needed}")]
    Grid { grid: usize, needed: usize },

    #[error("non-positive prediction variance {value:.3e} at order {order}")]
    NonPositiveVariance { order: usize, value: f64 },

    #[error("diagonal block {block} is singular or ill-conditioned (condition number {cond:.3e})")]
    SingularBlock { block: usize, cond: f64 },

    #[error("matrix is not Hermitian positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error(
        "fixed point did not converge after {iterations} iterations (last change {change:.3e})"
    )]
    NoConvergence { iterations: usize, change: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveVariance { .. }
                | Error::SingularBlock { .. }
                | Error::NotPositiveDefinite(_)
                | Error::NoConvergence { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
