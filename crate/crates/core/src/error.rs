use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("frequency numerator {k} outside the overflow guard |k| <= {limit}")]
    FrequencyGuard { k: i64, limit: i64 },

    #[error("{what} too large for exact mode ({size} > {limit}); use {alternative} instead")]
    CostGuard {
        what: &'static str,
        size: u64,
        limit: u64,
        alternative: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn domain(msg: impl Into<String>) -> Self {
        LabError::Domain(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        LabError::Invalid(msg.into())
    }

    /// True for errors raised by a cost guard; the runner turns these into
    /// per-cell skip records instead of failing the run.
    pub fn is_guard(&self) -> bool {
        matches!(self, LabError::CostGuard { .. })
    }
}
