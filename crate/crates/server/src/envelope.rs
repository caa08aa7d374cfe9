use serde::Serialize;
use serde_json::value::RawValue;

use breakout_core::{EventPayload, IntervalStats, MediatorFrame, ParticipantEvent, SessionEvent, SessionId};

/// `type` field of a stream envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Stats,
    Frame,
    ParticipantEvent,
}

#[derive(Serialize)]
struct Wire<'a> {
    #[serde(rename = "type")]
    kind: EnvelopeKind,
    session: &'a SessionId,
    seq: u64,
    payload: &'a RawValue,
}

/// A serialized stream envelope. The payload JSON is kept separately so HTTP
/// snapshot reads return exactly the bytes that were streamed.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub seq: u64,
    pub payload: Box<RawValue>,
    pub text: String,
}

impl Envelope {
    pub fn new<T: Serialize>(kind: EnvelopeKind, session: &SessionId, seq: u64, payload: &T) -> Self {
        let payload = serde_json::value::to_raw_value(payload).expect("payload types always serialize");
        let text = serde_json::to_string(&Wire { kind, session, seq, payload: &payload })
            .expect("envelope always serializes");
        Envelope { kind, seq, payload, text }
    }

    pub fn stats(session: &SessionId, seq: u64, stats: &IntervalStats) -> Self {
        Self::new(EnvelopeKind::Stats, session, seq, stats)
    }

    pub fn frame(session: &SessionId, seq: u64, frame: &MediatorFrame) -> Self {
        Self::new(EnvelopeKind::Frame, session, seq, frame)
    }

    pub fn participant_event(session: &SessionId, seq: u64, ev: &ParticipantEvent) -> Self {
        Self::new(EnvelopeKind::ParticipantEvent, session, seq, ev)
    }

    /// The streamed form of a log record, if that record kind is streamed.
    pub fn from_event(session: &SessionId, ev: &SessionEvent) -> Option<Self> {
        match &ev.payload {
            EventPayload::Stats(s) => Some(Self::stats(session, ev.seq, s)),
            EventPayload::Frame(f) => Some(Self::frame(session, ev.seq, f)),
            EventPayload::ParticipantEvent(p) => Some(Self::participant_event(session, ev.seq, p)),
            EventPayload::SampleBatch(_) | EventPayload::Segment(_) => None,
        }
    }

    pub fn payload_json(&self) -> &str {
        self.payload.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use breakout_core::{ParticipantId, Timestamp};

    #[test]
    fn wire_layout() {
        let sid = SessionId::new("s1").unwrap();
        let ev = ParticipantEvent::join(ParticipantId::new("a").unwrap(), Timestamp(5));
        let env = Envelope::participant_event(&sid, 3, &ev);
        assert_eq!(
            env.text,
            r#"{"type":"participant_event","session":"s1","seq":3,"payload":{"participant":"a","t":5,"kind":"JOIN"}}"#
        );
        assert_eq!(env.payload_json(), r#"{"participant":"a","t":5,"kind":"JOIN"}"#);
    }
}
