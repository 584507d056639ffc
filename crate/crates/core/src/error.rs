use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range arguments.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Arguments outside the domain of the operation (e.g. the zero vector).
    #[error("domain error: {0}")]
    Domain(String),

    /// A Hamiltonian term is not invariant under the weighted circle action.
    #[error("term {index} is not S^1-invariant: weighted degree {weighted_degree} != 0")]
    NotInvariant { index: usize, weighted_degree: i64 },

    /// The adaptive integrator could not make progress.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String, last_state: Vec<num_complex::Complex64> },

    /// Input violates a genericity requirement.
    #[error("non-generic input: resonant index pairs {pairs:?}")]
    NonGeneric { pairs: Vec<(usize, usize)> },

    #[error("parse error: {0}")]
    Parse(String),

    /// A guaranteed identity failed; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
