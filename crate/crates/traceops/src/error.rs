//! Error types shared across the library.

use thiserror::Error;

/// Library-wide error type.
///
/// Variants are grouped by the kind of failure rather than by module, so that
/// callers (in particular the CLI) can map them uniformly onto exit codes:
/// precondition/usage problems, numerical check failures, and Monte Carlo
/// budgets that were too small to decide anything.
#[derive(Debug, Error)]
pub enum Error {
    /// A function evaluation produced a non-finite or non-positive value
    /// where positivity is required.
    #[error("evaluation error at t = {t:.6e}: {message}")]
    Eval { t: f64, message: String },

    /// Not enough samples/points to run the requested fit or estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A monotonicity assumption (needed e.g. for inversion) failed.
    #[error("monotonicity violation: {0}")]
    Monotonicity(String),

    /// A query lies outside the representable/achievable range.
    #[error("domain error: {message} (achievable range [{lo:.6e}, {hi:.6e}])")]
    Domain { message: String, lo: f64, hi: f64 },

    /// An integral failed to converge; `end` names the offending end.
    #[error("divergent integral near the {end} end: {message}")]
    Divergence { end: IntegralEnd, message: String },

    /// A declared precondition of an operation is not satisfied.
    #[error("precondition not met: {0}")]
    Precondition(String),

    /// An invalid parameter value.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Kernel extension preconditions failed on one side of the two-sided bound.
    #[error("kernel not extendable: {side} bound violated ({detail})")]
    NotExtendable { side: BoundSide, detail: String },

    /// Compound-Poisson cutoff so large that the jump intensity vanishes.
    #[error("cutoff too large: jump intensity is zero at delta = {delta:.6e}")]
    CutoffTooLarge { delta: f64 },

    /// Monte Carlo budget below the accepted minimum.
    #[error("budget error: {0}")]
    Budget(String),

    /// Adaptive truncation of an integral was not reached within the budget.
    #[error("truncation not reached: {0}")]
    Truncation(String),

    /// The requested operation is not available for this object kind.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The dyadic range is too small; boundary terms are not negligible.
    #[error("dyadic range too small: {message}; suggested J >= {suggested_j}")]
    RangeTooSmall { message: String, suggested_j: i64 },

    /// Grid construction or validation failure.
    #[error("grid error: {0}")]
    Grid(String),

    /// Monte Carlo confidence interval too wide to decide the check.
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    /// Malformed descriptor (JSON/CSV) input.
    #[error("descriptor error: {0}")]
    Descriptor(String),
}

/// Which end of an integration range diverged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralEnd {
    Zero,
    Infinity,
}

impl std::fmt::Display for IntegralEnd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntegralEnd::Zero => write!(f, "zero"),
            IntegralEnd::Infinity => write!(f, "infinity"),
        }
    }
}

/// Which side of a two-sided bound failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

impl std::fmt::Display for BoundSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundSide::Lower => write!(f, "lower"),
            BoundSide::Upper => write!(f, "upper"),
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
