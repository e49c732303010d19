use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain the operation is defined on.
    #[error("value {value} outside [{low}, {high}] ({context})")]
    Domain {
        value: f64,
        low: f64,
        high: f64,
        context: String,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("capacity exceeded: {what} has size {size}, limit is {limit}")]
    Capacity {
        what: String,
        size: u128,
        limit: u128,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A declared invariant did not hold on a computed artifact.
    #[error("internal invariant failure: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn capacity(what: impl Into<String>, size: u128, limit: u128) -> Self {
        Error::Capacity {
            what: what.into(),
            size,
            limit,
        }
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } => 2,
            Error::Internal(_) => 3,
            _ => 1,
        }
    }
}
