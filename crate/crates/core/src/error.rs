use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("superluminal velocity: |v| = {speed} >= c = {c}")]
    Superluminal { speed: f64, c: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("non-finite state at step {step}, agent {agent}")]
    NonFiniteState { step: usize, agent: usize },

    #[error("mismatched ensembles: {0}")]
    Mismatch(String),

    #[error("flocking certificate not satisfied: {0}")]
    Uncertified(String),

    #[error("log of nonpositive value at t = {t}")]
    NonpositiveLog { t: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
