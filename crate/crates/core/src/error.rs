//! Crate-wide error type.

/// Errors produced by certificate evaluation, controllers, the QP solver,
/// simulation, and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested value lies outside the range of a monotone map.
    #[error("range error: {0}")]
    Range(String),

    /// A vector or matrix has the wrong dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// A disturbance margin exceeds what the barrier domain can absorb.
    #[error("margin error: {0}")]
    Margin(String),

    /// An operation was called on data it does not apply to.
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A certificate condition failed at a concrete state.
    #[error("certificate violation: {0}")]
    Certificate(String),

    /// The pointwise quadratic program has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Non-finite values or a failed numeric procedure.
    #[error("numerics error: {0}")]
    Numerics(String),

    /// An error raised while executing a simulation step.
    #[error("step {step} (t = {t}): {source}")]
    AtStep {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the simulation step it occurred at.
    pub fn at_step(self, step: usize, t: f64) -> Self {
        Error::AtStep {
            step,
            t,
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping step context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}
