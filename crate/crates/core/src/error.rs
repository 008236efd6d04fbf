//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A sensor-type pair was looked up that the coupling matrix does not know.
    #[error("no coupling configured for sensor types ({a}, {b})")]
    UnknownCoupling { a: String, b: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Not enough history to compute a baseline-relative statistic.
    #[error("insufficient history: need at least {needed} values, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    /// The configured active-node count exceeds the nodes still alive; the
    /// planner must be re-invoked with a reduced ceiling.
    #[error("active-node request exceeds live nodes: requested {requested}, live {live}")]
    InsufficientLiveNodes { requested: usize, live: usize },

    /// Scenario parse or validation failure; `location` names the offending field.
    #[error("scenario error at {location}: {message}")]
    Scenario { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn scenario(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
