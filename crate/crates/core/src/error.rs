use thiserror::Error;

#[derive(Debug, Error)]
pub enum Md3Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in `{tensor}`")]
    Numeric { tensor: String },

    #[error("degenerate belief: {0}")]
    DegenerateBelief(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Md3Error>;

pub(crate) fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Md3Error::Numeric {
            tensor: name.to_string(),
        })
    }
}
