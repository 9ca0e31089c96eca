//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the sensing library.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Invalid RIS geometry or illumination parameters.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Invalid or mismatched space-time coding.
    #[error("coding error: {0}")]
    Coding(String),

    /// Invalid field grid or a point outside its extent.
    #[error("grid error: {0}")]
    Grid(String),

    /// Degenerate numeric input (coincident points, zero distance, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid optimizer task or configuration.
    #[error("optimizer error: {0}")]
    Optimizer(String),

    /// Invalid scene description or simulation parameters.
    #[error("scene error: {0}")]
    Scene(String),

    /// Invalid signal or signal-processing parameters.
    #[error("signal error: {0}")]
    Signal(String),

    /// Invalid detection configuration or state-machine input.
    #[error("detection error: {0}")]
    Detection(String),

    /// Invalid decomposition configuration or input.
    #[error("vmd error: {0}")]
    Vmd(String),

    /// Malformed file content.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
