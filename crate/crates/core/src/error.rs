use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant to an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmvError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("singular: {0}")]
    Singular(String),
    #[error("rank deficient: achieved rank {achieved}, requested {requested}")]
    Rank { achieved: usize, requested: usize },
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("ill-posed: {0}")]
    IllPosed(String),
    #[error("evaluation point in pole region: {0}")]
    PoleRegion(String),
    #[error("tangential limit: {0}")]
    Tangential(String),
    #[error("branch error: {0}")]
    Branch(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CmvError>;

impl From<std::io::Error> for CmvError {
    fn from(e: std::io::Error) -> Self {
        CmvError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CmvError {
    fn from(e: serde_json::Error) -> Self {
        CmvError::Parse(e.to_string())
    }
}
