use thiserror::Error;

/// Errors raised by the transport, metric and data routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("infeasible marginals: {0}")]
    InfeasibleMarginals(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("data error: {0}")]
    DataFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical routines themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }

    /// True for failures caused by malformed or out-of-range input data.
    pub fn is_data(&self) -> bool {
        matches!(self, Error::Data { .. } | Error::DataFormat(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite<'a, I>(values: I, what: &str) -> Result<()>
where
    I: IntoIterator<Item = &'a f64>,
{
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
