use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the numeric and simulation layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument fell outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A constructor invariant was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An ODE step controller could not meet its tolerance.
    #[error("ode solver failed: {0}")]
    OdeTolerance(String),

    /// An iteration or quadrature did not converge within its budget.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A simulated tree exceeded the configured population cap.
    #[error("population cap of {cap} particles exceeded at time {at:.4}")]
    PopulationCap { cap: usize, at: f64 },

    /// A rejection sampler exhausted its attempt budget.
    #[error("rejection budget of {0} attempts exhausted")]
    RejectionBudget(usize),
}
