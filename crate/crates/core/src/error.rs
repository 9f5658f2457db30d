//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("condition number is undefined: modulus mu = 0")]
    UndefinedConditionNumber,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation requires concavity class {required}, got {found}")]
    InvalidClass {
        required: &'static str,
        found: &'static str,
    },

    #[error("normal equations are singular despite ridge (condition estimate {cond:.3e})")]
    Singular { cond: f64 },

    #[error("{what} failed to converge: {iterations} iterations, residual {residual:.3e}")]
    SolverFailure {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Attach the solver iteration at which the error occurred.
    pub fn at_iteration(self, iteration: usize) -> Error {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
