//! Error type shared across the crate.

use thiserror::Error;

/// Errors returned by schedule arithmetic, kernel construction, the exact
/// analysis engine, the runner, and config parsing.
#[derive(Debug, Error)]
pub enum AirError {
    /// An argument was outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Integer overflow while accumulating adaptation times.
    #[error("schedule overflow: {0}")]
    Overflow(String),

    /// A matrix failed a stochasticity or invariance validation.
    #[error("kernel validation failed: {0}")]
    Kernel(String),

    /// A linear solve failed or left a residual above tolerance.
    #[error("solve failed: {0}")]
    Solve(String),

    /// A distance-like function violated one of its contracts.
    #[error("distance contract violated: {0}")]
    Distance(String),

    /// An audit (bound check, identity check, certificate) failed.
    #[error("audit failed: {0}")]
    Audit(String),

    /// A required per-parameter table was missing during decomposition.
    #[error("missing parameter data: {0}")]
    MissingParam(String),

    /// Config file syntax or semantics error.
    #[error("config error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, AirError>;
