use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} requires sigma above threshold {threshold} (got sigma = {sigma})")]
    BelowThreshold {
        what: &'static str,
        sigma: f64,
        threshold: f64,
    },

    #[error("non-finite state in trajectory {trajectory} at t = {t}")]
    NonFinite { trajectory: u64, t: f64 },

    #[error("undefined phase at sample {sample}: |alpha| below 1e-6 rho")]
    UndefinedPhase { sample: usize },

    #[error("fields are sampled on different grids")]
    GridMismatch,

    #[error("{diverged} of {total} trajectories diverged (> 20%); parameters outside the validated regime")]
    Divergence { diverged: usize, total: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::BelowThreshold { .. }
            | Error::GridMismatch
            | Error::Config(_) => 2,
            Error::NonFinite { .. } | Error::Divergence { .. } | Error::UndefinedPhase { .. } => 3,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::BelowThreshold { .. } => "below_threshold",
            Error::NonFinite { .. } => "non_finite",
            Error::UndefinedPhase { .. } => "undefined_phase",
            Error::GridMismatch => "grid_mismatch",
            Error::Divergence { .. } => "divergence",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
