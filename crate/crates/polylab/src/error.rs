//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum PolyError {
    /// Malformed serialized data (paths, potential specs, configs).
    #[error("format error: {0}")]
    Format(String),

    /// A computation was refused because it exceeds a configured cap.
    /// The message includes the predicted cost so the caller can decide.
    #[error("cap exceeded: {0}")]
    CapExceeded(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to converge or went unstable.
    #[error("numerics: {0}")]
    Numerics(String),

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PolyError>;
