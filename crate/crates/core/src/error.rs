use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input is outside the domain of an operation (non-finite, wrong shape, negative pressure...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set or lookup table failed validation.
    #[error("configuration error in `{field}`: {reason}")]
    Configuration { field: String, reason: String },

    /// A linear solve was too ill-conditioned to trust.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The integrated state became non-finite.
    #[error("simulation error at t = {t} s: {reason}")]
    Simulation { t: f64, reason: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Configuration {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
