use thiserror::Error;

/// Errors raised by model construction, the solvers and the file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    /// A value left the open positive orthant where the risk measures are defined.
    #[error("domain error: {what} must be strictly positive (index {index}, value {value})")]
    Domain {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("matrix is not positive definite: Cholesky pivot {pivot} is {value}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Input(format!(
            "{what} has a non-finite entry at index {i}"
        ))),
        None => Ok(()),
    }
}

pub(crate) fn check_positive(what: &'static str, values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        // NaN fails the comparison too.
        if !(value > 0.0) {
            return Err(Error::Domain { what, index, value });
        }
    }
    Ok(())
}
