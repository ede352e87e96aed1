use thiserror::Error;

/// Errors raised by the scheme engine, the coding layer and the auditors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-uniform prefetching: M = {cache} is not a multiple of N = {databases}; the scheme requires M/N cached messages per database")]
    NonUniform { databases: usize, cache: usize },

    #[error("invalid prefetch plan: {0}")]
    Plan(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("symbol {value:#x} does not fit in GF(2^{width})")]
    Width { value: u32, width: u32 },

    #[error("invalid codeword position set: {0}")]
    Position(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("reconstruction failed: {0}")]
    Reconstruct(String),

    #[error("peeling failed: {0}")]
    Peel(String),

    #[error("audit budget exceeded: {0}")]
    Budget(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
