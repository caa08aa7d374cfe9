use thiserror::Error;

use crate::id::{ParticipantId, SessionId};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("identifier is empty")]
    Empty,
    #[error("identifier is {0} chars, limit is 64")]
    TooLong(usize),
    #[error("identifier contains {0:?}, allowed alphabet is [A-Za-z0-9_-]")]
    BadChar(char),
}

/// A single violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigViolation {
    #[error("volume_threshold out of (0,1)")]
    VolumeThreshold,
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("min_segment_ms < sample_period_ms")]
    MinSegmentBelowSamplePeriod,
    #[error("tick_ms > window_ms")]
    TickExceedsWindow,
    #[error("ball_smoothing_alpha out of (0,1]")]
    SmoothingAlpha,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("sample for {participant} at {t} precedes previous sample at {last}")]
    OutOfOrder { participant: ParticipantId, t: Timestamp, last: Timestamp },
    #[error("volume {0} outside [0,1]")]
    VolumeOutOfRange(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MediatorError {
    #[error("{0} participants exceed the layout limit of {max}", max = crate::mediator::MAX_PARTICIPANTS)]
    TooManyParticipants(usize),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("session {0} already exists")]
    SessionExists(SessionId),
    #[error("session closed")]
    SessionClosed(SessionId),
    #[error("invalid time range: from {from} is not before to {to}")]
    BadRange { from: Timestamp, to: Timestamp },
    #[error("storage I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("encoding failure: {0}")]
    Json(#[from] serde_json::Error),
}

/// Errors raised by a session owner while applying ingestion events.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error("participant {0} already joined")]
    AlreadyJoined(ParticipantId),
    #[error("participant {0} has not joined")]
    NotJoined(ParticipantId),
    #[error("session already has {0} participants")]
    Full(usize),
    #[error("tick failed: {0}")]
    Tick(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}
