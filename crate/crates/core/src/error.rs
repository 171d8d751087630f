//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A model parameter violated its domain (strict positivity, etc.).
    #[error("invalid parameter {name}: {value} ({constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// An operation that folds over a series was handed an empty one.
    #[error("empty series: {context}")]
    EmptySeries { context: &'static str },

    /// A series was shorter than the algorithm's minimum length.
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    /// A symmetric positive-definite factorization failed, typically from
    /// rounding on a nearly singular covariance.
    #[error("covariance factorization failed (matrix not positive definite at dimension {n})")]
    NotPositiveDefinite { n: usize },

    /// The dense likelihood path refuses dimensions beyond its policy cap.
    #[error("dense likelihood capped at n = {cap}, got {got}")]
    DenseCapExceeded { cap: usize, got: usize },

    /// Quadrature refinement stalled above the requested accuracy.
    #[error("quadrature did not converge: last refinement changed by {last_delta:e}")]
    QuadratureNoConvergence { last_delta: f64 },
}

impl Error {
    /// Whether this error reflects bad input (as opposed to a numerical
    /// failure inside an otherwise valid computation).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::EmptySeries { .. }
                | Error::SeriesTooShort { .. }
                | Error::DenseCapExceeded { .. }
        )
    }
}
