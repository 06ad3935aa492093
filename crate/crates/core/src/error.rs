use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input fell outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid scenario, parameters, weights or plan.
    #[error("configuration error: {0}")]
    Config(String),

    /// A scenario generator could not place robots.
    #[error("generation error: {0}")]
    Generation(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
