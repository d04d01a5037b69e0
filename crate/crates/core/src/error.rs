use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operands with incompatible dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid configuration or parameter set.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An exact zero divisor `<k, omega> + j = 0` was found.
    #[error("resonance: <k, omega> + j vanishes at k = {k:?}, j = {j}")]
    Resonance { k: Vec<i64>, j: i64 },

    /// A retained mode has a divisor below the certified floor.
    #[error("small divisor {divisor:.3e} below floor {floor:.3e} at k = {k:?}, l = {l}")]
    SmallDivisor {
        k: Vec<i32>,
        l: i32,
        divisor: f64,
        floor: f64,
    },

    /// The input violates a structural assumption (reversibility, zero mean).
    #[error("structure error: {0}")]
    Structure(String),

    /// A Newton step could not be completed.
    #[error("step failure at step {step}: {reason}")]
    StepFailure { step: usize, reason: String },

    /// A serialized object failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed input document.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
