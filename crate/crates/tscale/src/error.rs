//! Error type shared by all solvers and calculus operations.

/// Errors from time-scale construction, calculus and solvers.
#[derive(Debug, Clone, thiserror::Error)]
pub enum TsError {
    /// A query point is not a member of the time scale (within the
    /// membership tolerance).
    #[error("point {point} is not in the time scale")]
    PointNotInTimeScale { point: f64 },

    /// A window does not meet the time scale at all.
    #[error("window [{a}, {b}] does not intersect the time scale")]
    EmptyIntersection { a: f64, b: f64 },

    /// Integration endpoints given in the wrong order.
    #[error("reversed range: r = {r} > t = {t}")]
    ReversedRange { r: f64, t: f64 },

    /// Delta derivative requested where no forward neighbour exists.
    #[error("delta derivative undefined at boundary point {point}")]
    UndefinedAtBoundary { point: f64 },

    /// `1 + mu(t) p(t)` vanished somewhere on the window.
    #[error("not regressive at t = {witness}: 1 + mu*p = {value:e}")]
    NotRegressive { witness: f64, value: f64 },

    /// `I + mu(t) A(t)` is numerically singular at a scattered point.
    #[error("singular transition step at t = {point}")]
    SingularStep { point: f64 },

    /// The rectangle D contains no time-scale points.
    #[error("domain rectangle is empty on the time scale")]
    EmptyDomain,

    /// Fixed-point iteration failed to converge.
    #[error("no convergence after {iterations} iterations (last increment {last_increment:e})")]
    NoConvergence {
        iterations: usize,
        last_increment: f64,
    },

    /// An iterate or polygon left the state ball of radius `radius`.
    #[error("solution left the state ball of radius {radius} at t = {point}")]
    LeftDomain { point: f64, radius: f64 },

    /// No continuity modulus could be found above the minimum step.
    #[error("continuity modulus not found above {min_step:e} for eps = {eps}")]
    ModulusNotFound { eps: f64, min_step: f64 },

    /// Delay history was needed at a node where it is not defined.
    #[error("history missing at t = {point}")]
    HistoryMissing { point: f64 },

    /// `e^(lambda*tau) * L > lambda`: no positive critical step exists.
    #[error("no positive critical step: e^(lambda*tau)*L = {value} exceeds lambda = {lambda}")]
    NoPositiveStep { value: f64, lambda: f64 },

    /// Evaluation outside the computed range.
    #[error("point {point} is outside the computed range")]
    OutOfRange { point: f64 },

    /// Anything that violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, TsError>;
