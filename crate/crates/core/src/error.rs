//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by mesh construction, assembly, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid geometry data, e.g. a non-positive channel height sample.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A problem configuration that cannot be discretized.
    #[error("configuration error: {0}")]
    Config(String),

    /// Boundary or initial data violating a mathematical precondition.
    #[error("data error: {0}")]
    Data(String),

    /// An API used outside its contract (mismatched layouts, wrong facet, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Newton failed to converge within the iteration budget.
    #[error("step {step} failed: Newton did not converge, residual history {history:?}")]
    Step { step: usize, history: Vec<f64> },

    /// The sparse factorization failed (structurally or numerically singular).
    #[error("linear solver failure: {0}")]
    Linear(String),

    /// An eigenvalue estimate did not converge.
    #[error("eigen solver failure: {0}")]
    Eigen(String),

    /// The Coulomb fixed point did not contract even after window halving.
    #[error("non-contraction: inner iteration stalled after {halvings} window halvings (last increments {increments:?})")]
    NonContraction { halvings: usize, increments: Vec<f64> },

    /// Scenario file parse or validation failure.
    #[error("scenario error at `{key}`: {message}")]
    Scenario { key: String, message: String },

    /// Checkpoint parse or mismatch failure.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
