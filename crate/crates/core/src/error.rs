use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("truncation tail mass {tail:.3e} exceeds tolerance {tolerance:.3e}")]
    TailMass { tail: f64, tolerance: f64 },

    #[error("grid too small: covered mass {mass:.12} (tolerance {tolerance:.1e})")]
    GridTooSmall { mass: f64, tolerance: f64 },

    #[error("grid aliasing: boundary energy {energy:.3e} above {threshold:.1e}")]
    Aliasing { energy: f64, threshold: f64 },

    #[error("convergence guard violated: {0}")]
    ConvergenceGuard(String),

    #[error("memory budget exceeded: {0}")]
    MemoryBudget(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("state has no declared reflection symmetry")]
    MissingSymmetry,

    #[error("negative density mass {mass:.3e} after clipping")]
    NegativeDensity { mass: f64 },

    #[error("lower-bound family separation unattainable: {0}")]
    SeparationUnattainable(String),

    #[error("observable tail condition violated: tail {tail:.3e} >= {bound:.3e}")]
    TailCondition { tail: f64, bound: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Stable short identifier used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Unsupported(_) => "unsupported",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::TailMass { .. } => "tail_mass",
            Error::GridTooSmall { .. } => "grid_too_small",
            Error::Aliasing { .. } => "aliasing",
            Error::ConvergenceGuard(_) => "convergence_guard",
            Error::MemoryBudget(_) => "memory_budget",
            Error::EmptySamples => "empty_samples",
            Error::MissingSymmetry => "missing_symmetry",
            Error::NegativeDensity { .. } => "negative_density",
            Error::SeparationUnattainable(_) => "separation_unattainable",
            Error::TailCondition { .. } => "tail_condition",
            Error::NonFinite(_) => "non_finite",
            Error::Validation(_) => "validation",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
