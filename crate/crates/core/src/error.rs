use thiserror::Error;

use crate::linalg::SingularTriplets;

/// Failure while iterating for singular triplets; carries the best iterate reached.
#[derive(Debug, Clone)]
pub struct ConvergenceFailure {
    /// Index of the triplet that failed to converge.
    pub triplet: usize,
    pub iterations: usize,
    /// Relative residual `‖Aᵀu − σv‖ / σ₁` of the failing triplet.
    pub residual: f64,
    /// Converged triplets plus the unconverged iterate as the last entry.
    pub best: SingularTriplets,
}

#[derive(Debug, Error)]
pub enum SeedError {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Input data violates a structural requirement (shape, finiteness, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Numerically degenerate input, e.g. an all-zero column set.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("initial column draw was linearly dependent after {attempts} attempts")]
    InitFailure { attempts: usize },

    #[error(
        "singular triplet {} did not converge after {} iterations (residual {:.3e})",
        .0.triplet, .0.iterations, .0.residual
    )]
    NoConvergence(Box<ConvergenceFailure>),

    /// Cholesky update met a non-positive pivot.
    #[error("non-positive pivot {pivot:.3e} while adding atom {atom}")]
    NonPositivePivot { atom: usize, pivot: f64 },

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SeedError {
    /// True for failures of the numerics rather than of the inputs or config.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SeedError::Degenerate(_)
                | SeedError::InitFailure { .. }
                | SeedError::NoConvergence(_)
                | SeedError::NonPositivePivot { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SeedError>;
