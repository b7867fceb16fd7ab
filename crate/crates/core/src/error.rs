use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An enumeration or dense representation would exceed its size cap.
    #[error("{what}: size {size} exceeds cap {cap}")]
    SizeCap { what: &'static str, size: u128, cap: u128 },

    /// Weight dropped by the Fock cutoff is above tolerance.
    #[error("truncation: {lost:.3e} of the trace fell outside cutoff {cutoff} (tolerance {tolerance:.1e})")]
    Truncation { lost: f64, cutoff: usize, tolerance: f64 },

    /// A state or matrix failed a physicality check.
    #[error("numerical health: {0}")]
    NumericalHealth(String),

    /// A series or iteration did not reach its tolerance.
    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
