use thiserror::Error;

/// Errors produced by the accountant, mechanisms and harnesses.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("numerical error: {message}")]
    Numerical { message: String, diagnostics: String },

    /// No noise scale in the search bracket meets the privacy target.
    #[error("infeasible target: {0}")]
    Infeasible(String),

    /// A client vector or driver output could not be used.
    #[error("input error at round {round}: {message}")]
    Input { round: usize, message: String },

    /// Training produced a non-finite loss.
    #[error("training diverged at round {round}: loss = {loss}")]
    Diverged { round: usize, loss: f64 },

    /// A configuration document failed validation.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: msg.into(),
        }
    }
}
