use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant to an exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input data violates a structural requirement (negative weight, overlap
    /// outside `[0, 1]`, non-projection, dimension mismatch, ...).
    #[error("malformed input: {0}")]
    Malformed(String),

    /// Input is well formed but violates the hypothesis of a convertibility check.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// The entropy diverges (zero pair, or no overlapping block).
    #[error("entropy diverges: {0}")]
    Diverges(String),

    /// Trace vectors of the two pairs differ, so no channel can relate them.
    #[error("normalization mismatch: input traces ({in_a}, {in_b}) vs output traces ({out_a}, {out_b})")]
    NormalizationMismatch {
        in_a: f64,
        in_b: f64,
        out_a: f64,
        out_b: f64,
    },

    /// Requested instance exceeds the configured dimension cap.
    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    /// A conversion ruled out by the pure-state overlap criterion was requested.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn malformed(msg: impl Into<String>) -> Error {
    Error::Malformed(msg.into())
}

pub(crate) fn hypothesis(msg: impl Into<String>) -> Error {
    Error::Hypothesis(msg.into())
}
