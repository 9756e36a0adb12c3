use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation would overflow double precision.
    #[error("range error: {0}")]
    Range(String),

    /// A quadrature or iterative procedure failed to reach its tolerance.
    #[error("numerical error: {message} (achieved {achieved:e}, requested {requested:e})")]
    Numerical {
        message: String,
        achieved: f64,
        requested: f64,
    },

    /// The rejection sampler exceeded its proposal cap; the envelope is broken.
    #[error("rejection envelope failure at phi = {phi}: {proposals} proposals without acceptance")]
    Envelope { phi: f64, proposals: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
