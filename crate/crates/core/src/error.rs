use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no unused pilots: {users} active users occupy all {pilots} pilots")]
    NoUnusedPilots { users: usize, pilots: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("detector threshold has not been resolved")]
    UnresolvedThreshold,

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("trial {index}: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
