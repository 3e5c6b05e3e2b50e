//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors surfaced by instance handling, oracles, solvers, and pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// An instance violated a structural invariant (empty machine list,
    /// non-positive size, ...).
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A schedule failed validation against its instance.
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    /// A parameter pack could not be constructed from the requested profile.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An exact oracle was asked to solve an instance beyond its stated
    /// enumeration limits.
    #[error("oracle limits exceeded: {0}")]
    OracleLimit(String),

    /// A linear or mixed-integer model was infeasible.
    #[error("model infeasible: {0}")]
    Infeasible(String),

    /// A linear relaxation was unbounded below.
    #[error("model unbounded: {0}")]
    Unbounded(String),

    /// An enumeration (configurations, palettes, branch-and-bound nodes)
    /// exceeded its safety cap; the caller should shrink the instance or
    /// loosen the parameters.
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),

    /// A text artifact (instance or schedule file) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
