use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the dehazing pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum DehazeError {
    #[error("{}: file not found", path.display())]
    NotFound { path: PathBuf },

    #[error("{}: cannot decode image: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    DegenerateImage(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("size guard exceeded: {width}x{height} is larger than the {limit}x{limit} limit")]
    SizeGuard {
        width: usize,
        height: usize,
        limit: usize,
    },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = DehazeError> = std::result::Result<T, E>;
