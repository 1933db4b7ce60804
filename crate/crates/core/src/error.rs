//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("space has no grid generator; operator assembly requires a grid space")]
    NonGridSpace,

    #[error("potential must be non-negative, found {value} at point {index}")]
    NegativePotential { index: usize, value: f64 },

    #[error("fractional order must be an even integer >= 2, got {0}")]
    OddFractionalOrder(u32),

    #[error("semigroup order must satisfy m >= 2, got {0}")]
    InvalidOrder(f64),

    #[error("matrix is not self-adjoint in the weighted inner product (defect {defect:.3e}, tolerance {tol:.3e})")]
    Asymmetric { defect: f64, tol: f64 },

    #[error("operator is not non-negative: eigenvalue {lambda:.6e} below -{tol:.3e}")]
    NegativeEigenvalue { lambda: f64, tol: f64 },

    #[error("operator norm only supported for p in {{1, 2}}, got {0}")]
    UnsupportedNorm(f64),

    #[error("time grid bounds must satisfy 0 < t_min < t_max, got [{t_min}, {t_max}]")]
    BadTimeGrid { t_min: f64, t_max: f64 },

    #[error("time grid ratio must exceed 1, got {0}")]
    BadGridRatio(f64),

    #[error("molecule definition violated: {0}")]
    MoleculeDefinition(String),

    #[error("reproducing constants rejected: certificate residual {residual:.3e} exceeds {tol:.3e}")]
    ConstantsRejected { residual: f64, tol: f64 },

    #[error("partition cell {cell} is not contained in a radius-1 ball (worst distance {worst:.6})")]
    CellNotInUnitBall { cell: usize, worst: f64 },

    #[error("tail checks require a spectral gap; operator has lambda0 = {0:.3e}")]
    GaplessOperator(f64),

    #[error("field length {found} does not match space size {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
