use thiserror::Error;

use crate::nonlinear::FixedPointTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis size {count} exceeds the configured cap {cap}")]
    BasisTooLarge { count: u128, cap: usize },

    #[error("tensor grid with {count} nodes exceeds the configured cap {cap}")]
    GridTooLarge { count: u128, cap: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("non-finite integrand value {value} at node {node:?}")]
    NonFinite { node: Vec<f64>, value: f64 },

    #[error("drift contract violated: {0}")]
    Contract(String),

    #[error("density is degenerate: positive quadrature mass {positive_mass:.6} < 0.5")]
    Degenerate { positive_mass: f64 },

    #[error(
        "Galerkin system is singular or ill-conditioned (condition estimate {condition:.3e}); \
         increase the basis degree or reduce the drift"
    )]
    IllConditioned { condition: f64 },

    #[error("fixed-point iteration did not reach tolerance after {} iterations", .trace.records.len())]
    NonConvergence { trace: Box<FixedPointTrace> },

    #[error("oracle domain too small: boundary density {boundary:.3e} exceeds {limit:.1e}")]
    DomainTooSmall { boundary: f64, limit: f64 },

    #[error("SDE particle left the box |x| <= 1e6 at step {step}; reduce dt")]
    Instability { step: usize },

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}
