use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid configuration: field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("integration diverged: {0}")]
    Divergence(String),
    #[error(
        "positivity violated at t = {time}: minimum eigenvalue {min_eigenvalue:.3e}; reduce dt"
    )]
    Positivity { time: f64, min_eigenvalue: f64 },
    #[error("truncation leakage at t = {time}: orphan population {population:.3e} exceeds {limit:.1e}; increase n_max")]
    Leakage {
        time: f64,
        population: f64,
        limit: f64,
    },
    #[error("jump has zero norm: {0}")]
    ZeroNormJump(String),
    #[error("time grid mismatch: {0}")]
    GridMismatch(String),
    #[error("fit degenerate: {0}")]
    FitDegenerate(String),
    #[error("ansatz violated: {0}")]
    AnsatzViolated(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("record format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
