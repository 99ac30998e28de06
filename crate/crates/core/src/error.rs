use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all-pairs distance cache refused for n = {n} (limit {limit})")]
    CacheTooLarge { n: usize, limit: usize },

    #[error("oracle standard error {se:.3e} exceeds ceiling {ceiling:.3e}")]
    OracleTooNoisy { se: f64, ceiling: f64 },

    #[error("identification check failed: {0}")]
    NotIdentified(String),

    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
