use thiserror::Error;

/// Errors raised by the spline, penalty, smoothing and selection routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplineError {
    #[error("at least 3 knots are required, got {0}")]
    TooFewKnots(usize),
    #[error("knots must be strictly increasing: knot {index} ({next}) does not exceed its predecessor ({prev})")]
    NonIncreasingKnots { index: usize, prev: f64, next: f64 },
    #[error("non-finite input value at position {0}")]
    NonFiniteInput(usize),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("t = {t} lies outside the knot range [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("derivative order {0} is not supported (expected 0..=3)")]
    InvalidOrder(usize),
    #[error("derivative order {0} is not supported for Gram matrices (expected 0..=2)")]
    InvalidDerivativeOrder(usize),
    #[error("index {index} out of range (valid: 0..{len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("bordered tridiagonal system is singular")]
    SingularSystem,
    #[error("all penalty coefficients are zero")]
    AllCoefficientsZero,
    #[error("penalty matrix is not symmetric")]
    NotSymmetric,
    #[error("penalty matrix is not non-negative definite (smallest eigenvalue {0})")]
    NotNonNegative(f64),
    #[error("null spaces of the objective and the constraints overlap")]
    OverlappingNullspaces,
    #[error("constraint right-hand side is not in the range of the constraint matrix")]
    InconsistentConstraint,
    #[error("smoothing parameter must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("smoothing parameter must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error(
        "boundary-curvature corner block of the penalty is singular; the estimator is not unique"
    )]
    SingularCorner,
    #[error("penalty has a trivial null space; the infinite-smoothing limit is not a constrained regression")]
    EmptyNullspace,
    #[error("invalid selection configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("minimizer lies at the edge of the search bracket [{lo:e}, {hi:e}]")]
    BracketTooNarrow { lo: f64, hi: f64 },
    #[error("generalized least-squares system is singular")]
    SingularGls,
    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),
}

pub type Result<T> = std::result::Result<T, SplineError>;
