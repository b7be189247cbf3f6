//! Error type shared across the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by episode construction, solvers, simulation and I/O.
#[derive(Debug)]
pub enum Error {
    /// Shape mismatch between feature matrices or vectors.
    Dimension(String),
    /// An operation received an empty collection it cannot average or reduce.
    EmptyInput(String),
    /// Input contains non-finite values.
    Validation(String),
    /// A scalar parameter is outside its allowed range.
    Parameter(String),
    /// Iterative solver failed to reach its tolerance.
    Convergence { iterations: usize, residual: f64 },
    /// A quantity that must be strictly positive (class mass, slice sum) vanished.
    Degenerate(String),
    /// Dense linear algebra failed (rank deficiency, factorization error).
    Numerical(String),
    /// Episode file is malformed or has an unsupported version.
    Format(String),
    /// Underlying I/O failure, annotated with the path where possible.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::EmptyInput(msg) => write!(f, "empty input: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Parameter(msg) => write!(f, "parameter error: {msg}"),
            Error::Convergence { iterations, residual } => write!(
                f,
                "convergence error: no fixed point after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
