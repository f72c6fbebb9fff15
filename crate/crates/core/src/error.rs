use thiserror::Error;

/// Errors surfaced by the library. Malformed corpus records are not errors;
/// they are skipped and counted by the parsers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid username {0:?}: expected 1-15 characters of [A-Za-z0-9_]")]
    InvalidUsername(String),

    #[error("invalid timestamp {0:?}")]
    InvalidTimestamp(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed table: {0}")]
    Table(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
