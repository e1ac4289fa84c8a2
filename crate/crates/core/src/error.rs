//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A point that must lie strictly inside the unit disk does not.
    #[error("point outside the open unit disk (|z| = {modulus})")]
    OutsideDisk { modulus: f64 },

    /// A point that must lie on the unit circle does not.
    #[error("point off the unit circle (|z| = {modulus})")]
    OffCircle { modulus: f64 },

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// Structural requirement on sampled data is violated.
    #[error("bad grid: {0}")]
    BadGrid(String),

    /// A construction could not be completed.
    #[error("construction failed: {0}")]
    Construction(String),

    /// Symbol mini-language parse failure.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
