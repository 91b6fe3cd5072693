use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate vector: norm {norm:e} is below 1e-12")]
    DegenerateVector { norm: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sampler stalled: accepted {accepted} of {proposals} proposals (acceptance rate {rate:.3e})")]
    SamplerStall {
        accepted: usize,
        proposals: usize,
        rate: f64,
    },

    #[error("unsupported dimension {got} (operation requires {required})")]
    UnsupportedDimension { required: usize, got: usize },

    #[error("sample is not strictly linearly separable (margin upper bound {upper_bound:e})")]
    InfeasibleSample { upper_bound: f64 },

    #[error("solver did not converge after {iterations} sweeps (gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("instance too large: {0}")]
    SizeGuard(String),

    #[error("net construction failed: {0}")]
    NetConstruction(String),

    #[error("empty net")]
    EmptyNet,

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
