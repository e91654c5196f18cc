//! Error type shared by all engine modules.

use core::fmt;

/// Errors reported by the numerical engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix dimensions do not match the operation.
    DimensionMismatch { expected: usize, got: usize },
    /// A matrix that must be invertible is singular to working precision.
    Singular,
    /// A computation produced a non-finite value (overflow or NaN).
    NonFinite,
    /// The element is not Gauss-decomposable: a pivot of the trailing-minor
    /// elimination fell below the pivot tolerance, signalling `g` outside
    /// the open factorizable set.
    NotInCheckedDomain { pivot_index: usize },
    /// The two candidate subalgebras do not form a vector-space direct sum.
    DirectSumViolation,
    /// A candidate basis is not closed under the matrix bracket.
    NotSubalgebra { residual: f64 },
    /// The trace form restricted to the span is degenerate (or the basis is
    /// linearly dependent).
    DegenerateForm,
    /// An element fails a subspace membership check.
    NotInSubspace { subspace: &'static str, residual: f64 },
    /// Exact factorization failed along a flow; the offending time is the
    /// first sample at which `exp(t L0)` left the factorizable set.
    FactorizationBlowup { t_fail: f64 },
    /// A trajectory state stopped being finite; `t_last` is the last good time.
    NonFiniteState { t_last: f64 },
    /// Too few samples to apply central finite differences.
    TooFewSamples { got: usize, need: usize },
    /// A point supposed to lie on the constraint surface violates a
    /// constraint beyond tolerance.
    OffConstraintSurface { residual: f64 },
    /// The second-class constraint block has the wrong rank, indicating a
    /// misclassification rather than a marginally conditioned inversion.
    SecondClassRank { expected: usize, got: usize },
    /// The second-class block is numerically invertible but too badly
    /// conditioned for the Dirac correction to be trustworthy.
    IllConditionedBlock { cond: f64 },
    /// Constraint drift along a constrained integration exceeded the abort
    /// threshold.
    ConstraintDrift { t: f64, drift: f64 },
    /// A `ConstraintSet` was used before `classify_constraints` filled in
    /// its classification.
    Unclassified,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::Singular => write!(f, "matrix is singular to working precision"),
            Error::NonFinite => write!(f, "non-finite result"),
            Error::NotInCheckedDomain { pivot_index } => write!(
                f,
                "not Gauss-decomposable: pivot {pivot_index} below tolerance"
            ),
            Error::DirectSumViolation => {
                write!(f, "subalgebras do not span the algebra as a direct sum")
            }
            Error::NotSubalgebra { residual } => {
                write!(f, "basis not closed under bracket (residual {residual:e})")
            }
            Error::DegenerateForm => write!(
                f,
                "trace form degenerate on span (or basis linearly dependent)"
            ),
            Error::NotInSubspace { subspace, residual } => {
                write!(f, "element not in {subspace} (residual {residual:e})")
            }
            Error::FactorizationBlowup { t_fail } => {
                write!(f, "factorization blow-up at t = {t_fail}")
            }
            Error::NonFiniteState { t_last } => {
                write!(f, "state non-finite; last good time t = {t_last}")
            }
            Error::TooFewSamples { got, need } => {
                write!(f, "need at least {need} samples, got {got}")
            }
            Error::OffConstraintSurface { residual } => {
                write!(f, "point off constraint surface (residual {residual:e})")
            }
            Error::SecondClassRank { expected, got } => write!(
                f,
                "second-class block rank {got} does not match expected {expected}"
            ),
            Error::IllConditionedBlock { cond } => {
                write!(f, "second-class block ill-conditioned (cond {cond:e})")
            }
            Error::ConstraintDrift { t, drift } => {
                write!(f, "constraint drift {drift:e} at t = {t} exceeds abort threshold")
            }
            Error::Unclassified => write!(f, "constraint set has not been classified"),
        }
    }
}

impl core::error::Error for Error {}

/// Convenience alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;
