use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested tolerance could not be reached; carries the achieved bound.
    #[error("accuracy error: {what} (achieved {achieved:.3e}, requested {requested:.3e})")]
    Accuracy {
        what: String,
        achieved: f64,
        requested: f64,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn accuracy(what: impl Into<String>, achieved: f64, requested: f64) -> Self {
        Error::Accuracy {
            what: what.into(),
            achieved,
            requested,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
