use thiserror::Error;

/// Errors raised by the deviation toolkit.
///
/// Numeric failures carry enough context (last iterate, residual, offending
/// grid value) to diagnose the failing input without re-running it.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("degenerate distribution: support is the single point {0}")]
    DegenerateDistribution(u64),

    #[error("tail mass cannot be certified below {eps:e}: {reason}")]
    TruncationInfeasible { eps: f64, reason: String },

    #[error("argument {value} outside the certified domain (upper bound {upper})")]
    DomainViolation { value: f64, upper: f64 },

    #[error("target {target} outside the range of the CGF derivative ({lo}, {hi})")]
    TargetOutsideRange { target: f64, lo: f64, hi: f64 },

    #[error("no convergence after {iterations} iterations: residual {residual:e} at {last:?}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("span of the lattice law is {0}; a span-1 law is required")]
    SpanNotOne(u64),

    #[error("k/n_terms = {ratio} differs from the mean {mean}")]
    MeanMismatch { ratio: f64, mean: f64 },

    #[error("quadrature unresolved: {0}")]
    QuadratureUnresolved(String),

    #[error("conditioning event S = {k} over {n_terms} terms has zero probability")]
    ZeroProbabilityEvent { k: u64, n_terms: u64 },

    #[error("residual variance {0:e} vanishes: the mark is affine in X")]
    DegenerateResidual(f64),

    #[error("DP state count {needed} exceeds the budget {budget}")]
    StateBudgetExceeded { needed: usize, budget: usize },

    #[error("marks are not on a rational lattice: {0}")]
    IrrationalMarks(String),

    #[error("alternating sum cancellation too severe (estimated relative error {0:e})")]
    AlternatingCancellation(f64),

    #[error("rejection limit exceeded: {accepted} accepted out of {attempts} attempts (rate {rate:e})")]
    MaxRejectionsExceeded {
        accepted: usize,
        attempts: u64,
        rate: f64,
    },

    #[error("mark has a one-sided Laplace domain: {0}")]
    MarkDomainViolation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
