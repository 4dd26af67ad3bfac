//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by simulator operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Qubit count outside the supported range.
    #[error("qubit count {q} outside supported range [{min}, {max}]")]
    QubitCountOutOfRange { q: usize, min: usize, max: usize },

    /// The dense full-space oracle refuses to build 2^q-dimensional operators
    /// past its resource cap.
    #[error("full-space oracle capped at q = {cap}, requested q = {q}")]
    OracleCapExceeded { q: usize, cap: usize },

    /// Generic invalid argument (negative rate, out-of-range probability, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Binomial coefficient requested with k > n or n beyond the table.
    #[error("binomial({n}, {k}) undefined or outside table")]
    BinomialOutOfRange { n: usize, k: usize },

    /// Flat reduced index outside [0, M).
    #[error("reduced index {index} out of range for q = {q} (M = {size})")]
    IndexOutOfRange { index: usize, q: usize, size: usize },

    /// A state invariant (trace, Hermiticity, positivity) was violated.
    #[error("state invariant violated: {check} = {magnitude:.3e} exceeds {tolerance:.3e}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    InvariantViolation {
        check: &'static str,
        magnitude: f64,
        tolerance: f64,
        context: Option<String>,
    },

    /// Linear solver failure that the least-squares fallback could not rescue.
    #[error("steady-state solve failed: {reason} (condition estimate {condition:.3e})")]
    SolverFailure { reason: String, condition: f64 },

    /// Estimated Liouvillian size exceeds the configured memory guard.
    #[error("estimated {nonzeros} structural nonzeros exceed cap {cap}")]
    MemoryGuard { nonzeros: usize, cap: usize },

    /// Malformed sweep configuration.
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),

    /// I/O error while reading or writing tables.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Failure parsing an emitted table back in.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
