use thiserror::Error;

/// Errors raised by the geometry, discretization and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("as1 violated: chi' must be positive (r = {r})")]
    NonMonotoneArc { r: f64 },

    #[error("arclength identity violated: psi'^2 + chi'^2 = {value} at r = {r}")]
    ArclengthViolated { r: f64, value: f64 },

    #[error("self-intersecting tube: kappa * max Psi = {0} >= 1")]
    SelfIntersecting(f64),

    #[error("curvature exceeds continuation bound: kappa = {kappa} > kappa0 = {kappa0} (need n > {n_bound})")]
    CurvatureExceedsBound { kappa: f64, kappa0: f64, n_bound: f64 },

    #[error("degenerate metric: Phi = {0} <= 0")]
    DegenerateMetric(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-monotone pattern: U' = {slope} at s = {s}")]
    NonMonotonePattern { s: f64, slope: f64 },

    #[error("newton diverged after {iterations} iterations (residual history {history:?})")]
    NewtonDiverged { iterations: usize, history: Vec<f64> },

    #[error("fold detected: Jacobian singular beyond regularization")]
    FoldDetected,

    #[error("eigen solver did not converge in {iterations} iterations (residual {residual:e})")]
    EigenNotConverged { iterations: usize, residual: f64 },

    #[error("not principal - restart with new seed ({negative} negative entries)")]
    NotPrincipal { negative: usize },

    #[error("non-finite value encountered at step {0}")]
    NonFinite(usize),

    #[error("matrix not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("singular matrix at row {0}")]
    Singular(usize),

    #[error("no continuation neighborhood found at this resolution")]
    NoContinuationNeighborhood,

    #[error("no stable base pattern at this resolution")]
    NoStableBasePattern,

    #[error("criterion not satisfied: best stability margin {margin} at s0 = {s0}")]
    CriterionNotSatisfied { margin: f64, s0: f64 },

    #[error("degenerate field: gradient identically below tolerance")]
    DegenerateField,

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
