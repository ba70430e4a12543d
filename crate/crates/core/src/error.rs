use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("{qubits} qubits exceeds the supported maximum of {max}")]
    TooManyQubits { qubits: usize, max: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("matrix is not {property} (deviation {deviation:.3e})")]
    NotPhysical {
        property: &'static str,
        deviation: f64,
    },

    #[error("invalid qubit index {index} for a {qubits}-qubit system")]
    InvalidQubit { index: usize, qubits: usize },

    #[error("keep set must not be empty")]
    EmptyKeepSet,

    #[error("states are not orthonormal (overlap {0:.3e})")]
    NotOrthonormal(f64),

    #[error("post-selection failed: no surviving events{0}")]
    Starvation(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("tomographically incomplete record set: {0}")]
    Incomplete(String),

    #[error("configuration error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: name.to_string(),
            reason: format!("{value} is outside [0, 1]"),
        })
    }
}
