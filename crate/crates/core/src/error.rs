use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("chain is not unichain: {closed_classes} closed communicating classes")]
    NotUnichain { closed_classes: usize },

    #[error("numerical error: {message} (condition number {condition:.3e})")]
    Numerical { message: String, condition: f64 },

    #[error("TD fixed point undefined: {0}")]
    TdUndefined(String),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("missing exact average-cost attachments: {0}")]
    MissingLambda(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
