use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("building artifacts for {mechanism}: {source}")]
    Artifact {
        mechanism: String,
        #[source]
        source: ibpa_core::Error,
    },
    #[error(transparent)]
    Core(#[from] ibpa_core::Error),
    #[error(transparent)]
    Estimation(#[from] ibpa_estimation::EstimationError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn config_error(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}
