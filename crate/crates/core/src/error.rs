use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("channel is not trace preserving: defect {defect:.3e} exceeds {tol:.3e}")]
    NotTracePreserving { defect: f64, tol: f64 },

    #[error("operator is not a projector (deviation {0:.3e})")]
    NotProjector(f64),

    #[error("inputs are not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("selected measurement branch has zero probability")]
    ZeroProbabilityBranch,

    #[error("truncation guard violated: {0}")]
    Leakage(String),

    #[error("Knill-Laflamme conditions violated: {0}")]
    KnillLaflamme(String),

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("odd number of defects ({0}); syndromes always come in pairs")]
    OddDefects(usize),

    #[error("pattern has a nonempty syndrome")]
    NonemptySyndrome,

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
