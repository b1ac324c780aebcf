use thiserror::Error;

pub type Result<T> = std::result::Result<T, CstError>;

#[derive(Debug, Error)]
pub enum CstError {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CstError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        CstError::Parameter(msg.into())
    }
}
