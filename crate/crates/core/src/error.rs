use thiserror::Error;

/// Errors raised across the planning pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidParameter { key: &'static str, reason: String },

    #[error("sensor origin occluded")]
    SensorOccluded,

    #[error("unbounded task: {0}")]
    UnboundedTask(String),

    #[error("start in collision")]
    StartInCollision,

    #[error("reset undefined for interrupted state {0}")]
    ResetUndefined(usize),

    #[error("expanding interrupted state {0}")]
    ExpandInterrupted(usize),

    #[error("state {0} was already expanded")]
    AlreadyExpanded(usize),

    #[error("no viable plan")]
    NoViablePlan,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(key: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        key,
        reason: reason.into(),
    }
}
