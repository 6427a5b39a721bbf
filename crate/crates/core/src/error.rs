use thiserror::Error;

use crate::qp::QpSolution;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// All reference points coincide, so no positive lengthscale exists.
    #[error("all points are identical; median pairwise distance is zero")]
    ZeroDistance,

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The quadratic has negative curvature along a search direction.
    #[error("matrix is not positive semidefinite (curvature {0:e} along a step direction)")]
    NegativeCurvature(f64),

    /// Iteration budget ran out before the duality gap met the tolerance.
    /// Carries the best iterate so callers can still use it.
    #[error("iteration budget exhausted with duality gap {:e} > tolerance {:e}", .best.gap, .tolerance)]
    BudgetExceeded { best: Box<QpSolution>, tolerance: f64 },

    /// The objective stopped decreasing at floating-point resolution before
    /// the duality gap met the tolerance. Carries the best iterate.
    #[error("solver stalled at numerical precision with duality gap {:e} > tolerance {:e}", .best.gap, .tolerance)]
    Stalled { best: Box<QpSolution>, tolerance: f64 },

    /// No truncation level `d` is admissible for this pool size.
    #[error("infeasible truncation level: N = {n} < 6(d+1) = {}", 6 * (.d + 1))]
    InfeasibleTruncation { n: usize, d: usize },

    #[error("too few trials: {0} (need at least {1})")]
    TooFewTrials(usize, usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed CSV row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
