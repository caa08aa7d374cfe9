use serde::{Deserialize, Serialize};

use crate::id::ParticipantId;
use crate::scalar::Scalar;
use crate::time::Timestamp;

/// One participant's normalized loudness at an instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct VolumeSample<S: Scalar = f64> {
    pub participant: ParticipantId,
    pub t: Timestamp,
    pub volume: S,
}

impl<S: Scalar> VolumeSample<S> {
    pub fn new(participant: ParticipantId, t: Timestamp, volume: S) -> Self {
        VolumeSample { participant, t, volume }
    }

    pub fn volume_in_range(&self) -> bool {
        self.volume >= S::zero() && self.volume <= S::one()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ParticipantEventKind {
    Join,
    Leave,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantEvent {
    pub participant: ParticipantId,
    pub t: Timestamp,
    pub kind: ParticipantEventKind,
}

impl ParticipantEvent {
    pub fn join(participant: ParticipantId, t: Timestamp) -> Self {
        ParticipantEvent { participant, t, kind: ParticipantEventKind::Join }
    }

    pub fn leave(participant: ParticipantId, t: Timestamp) -> Self {
        ParticipantEvent { participant, t, kind: ParticipantEventKind::Leave }
    }
}

/// A maximal detected speaking interval for one participant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpeakingSegment {
    pub participant: ParticipantId,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl SpeakingSegment {
    pub fn new(participant: ParticipantId, start: Timestamp, end: Timestamp) -> Self {
        SpeakingSegment { participant, start, end }
    }

    pub fn len_ms(&self) -> u64 {
        self.end.since(self.start)
    }
}
