use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("oracle grid has {0} candidates, above the 1e8 limit")]
    GridTooLarge(u128),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
