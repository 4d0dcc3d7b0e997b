use thiserror::Error;

/// Errors raised by model validation, discretization and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degeneracy hypothesis violated: mu_a = {mu_a} but it must satisfy 0 <= mu_a < 2")]
    DegeneracyOutOfRange { mu_a: f64 },

    #[error("coefficient is not positive at x = {x} (a(x) = {value})")]
    NonPositive { x: f64, value: f64 },

    #[error("coefficient must vanish at x = 0 (a(0) = {value})")]
    NotDegenerateAtOrigin { value: f64 },

    #[error("delay hypothesis violated: {0}")]
    DelayHypothesisViolated(String),

    #[error("invalid parameter: {0}")]
    BadParameter(String),

    #[error("invalid mesh parameters: {0}")]
    BadMeshParams(String),

    #[error("boundary condition at x = 0 does not match the degeneracy regime (mu_a = {mu_a}, requested {requested})")]
    BcMismatch { mu_a: f64, requested: &'static str },

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("time {s} is outside the stored history span [{start}, {end}]")]
    OutOfSpan { s: f64, start: f64, end: f64 },

    #[error("initial data incompatible with the boundary condition at x = 0: u0(0) = {value}")]
    IncompatibleInitialData { value: f64 },

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("no strict damping: C3 = {c3} must be positive")]
    NoStrictDamping { c3: f64 },

    #[error("state violates the generator domain constraints by {violation:e}")]
    DomainViolation { violation: f64 },

    #[error("config error: {0}")]
    ConfigParse(String),
}

impl Error {
    /// True for errors that mean the model hypotheses themselves are violated,
    /// as opposed to plumbing or numerical failures.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::DegeneracyOutOfRange { .. }
                | Error::NonPositive { .. }
                | Error::NotDegenerateAtOrigin { .. }
                | Error::DelayHypothesisViolated(_)
                | Error::IncompatibleInitialData { .. }
                | Error::BcMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
