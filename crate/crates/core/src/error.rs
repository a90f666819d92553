//! Library-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("world generation failed: {0}")]
    WorldGeneration(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("internal integrity violation: {0}")]
    Integrity(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
