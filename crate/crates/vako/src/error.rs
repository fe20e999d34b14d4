//! Error type shared across the library.
//!
//! Numerical failures carry enough context (condition numbers, residuals,
//! failure times) for a caller to decide between retrying with a different
//! start and reporting the problem as genuinely outside the method's domain.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A fiber map's derivative is not invertible where the computation
    /// needs it: singular fiber Hessian at a candidate solution, or several
    /// distinct preimages of the same dual point.
    #[error("fiber map is not hyper-regular: {detail}")]
    NotHyperRegular { detail: String },

    /// Newton's method hit its iteration budget without meeting tolerance.
    #[error("no convergence after {iterations} iterations (best residual {best_residual:.3e})")]
    MaxIterations { iterations: usize, best_residual: f64 },

    /// A linear solve inside Newton met a numerically singular Jacobian.
    #[error("singular Jacobian (condition estimate {condition:.3e})")]
    SingularJacobian { condition: f64 },

    /// A user callback or an intermediate value produced NaN/Inf.
    #[error("non-finite evaluation at {at}")]
    NonFiniteEvaluation { at: String },

    /// The combined frame matrix [X | X'] is numerically singular at a point.
    #[error("degenerate frame at t={t} (condition estimate {condition:.3e})")]
    DegenerateFrame { t: f64, condition: f64 },

    /// A point claimed to lie on a submanifold does not, within tolerance.
    #[error("point is not on the submanifold (residual {residual:.3e})")]
    NotOnSubmanifold { residual: f64 },

    /// A level-set constraint Jacobian lost rank where full rank is required.
    #[error("rank-deficient constraint: {detail}")]
    RankDeficientConstraint { detail: String },

    /// A matrix required to be symmetric positive definite is not.
    #[error("matrix is not positive definite: {detail}")]
    NotPositiveDefinite { detail: String },

    /// A curve violates the horizontality constraint beyond tolerance.
    #[error("curve is not horizontal (max residual {max_residual:.3e}, tolerance {tolerance:.3e})")]
    NonHorizontal { max_residual: f64, tolerance: f64 },

    /// Supplied controls do not reproduce the curve's velocity.
    #[error("controls inconsistent with curve velocity (max residual {max_residual:.3e})")]
    InconsistentControls { max_residual: f64 },

    /// A dimension disagreement between two coupled objects.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize, context: String },

    /// Every shooting start failed; carries the best residual seen.
    #[error("no solution found (best residual {best_residual:.3e})")]
    NoSolutionFound { best_residual: f64 },

    /// Unknown built-in problem name.
    #[error("unknown problem name {name:?}")]
    UnknownProblem { name: String },

    /// Malformed input file or option set (schema-level failure).
    #[error("schema error: {detail}")]
    Schema { detail: String },

    /// Filesystem failure while reading inputs or writing outputs.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for schema-level problems, 4 when a
    /// solver legitimately finds nothing, 3 for every numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. }
            | Error::UnknownProblem { .. }
            | Error::DimensionMismatch { .. }
            | Error::Io(_) => 2,
            Error::NoSolutionFound { .. } => 4,
            _ => 3,
        }
    }
}
