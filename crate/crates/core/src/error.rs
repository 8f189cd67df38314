use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("column {name} is constant and cannot be standardized")]
    ConstantColumn { name: String },

    #[error("row {row}, column {column}: unparseable")]
    Unparseable { row: usize, column: String },

    /// A factorization or solve produced a non-positive pivot or a non-finite
    /// value. The shrinkage state must be floored before factorizing.
    #[error("degenerate shrinkage state: {0}")]
    Degenerate(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by bad user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::ConstantColumn { .. }
                | Error::Unparseable { .. }
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
