use thiserror::Error;

/// Errors raised by the risk, model, solver and oracle layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A probability distribution failed validation.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A model component failed validation.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A policy does not cover a required stage or picks an inadmissible action.
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    /// Value iteration ran out of sweeps before the stopping rule fired.
    #[error("value iteration did not converge after {sweeps} sweeps (last residual {residual:e})")]
    NotConverged { sweeps: usize, residual: f64 },

    /// Bellman iterates decreased somewhere, which nonnegative costs rule out.
    #[error("monotonicity violated at sweep {sweep}, state {state}: {previous} -> {current}")]
    NonMonotone {
        sweep: usize,
        state: usize,
        previous: f64,
        current: f64,
    },

    /// A brute-force oracle would exceed its size budget.
    #[error("resource budget exceeded: {what} needs {needed}, budget is {budget}")]
    Resource {
        what: &'static str,
        needed: f64,
        budget: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
