//! The per-session owner: applies ingestion in order, persists every accepted
//! input and derived record, and rebuilds itself from the log after restart.

use std::collections::BTreeMap;

use crate::analytics::{IntervalStats, SessionSnapshot};
use crate::error::{SessionError, StoreError};
use crate::event::{ParticipantEvent, ParticipantEventKind, SpeakingSegment, VolumeSample};
use crate::id::{ParticipantId, SessionId};
use crate::mediator::{compute_frame, MediatorFrame, MAX_PARTICIPANTS};
use crate::scalar::Scalar;
use crate::segmenter::SegmenterState;
use crate::store::{EventPayload, ReplayOutcome, SegmentIndex, SessionEvent, SessionLog, SessionMeta, Store};
use crate::time::{Timestamp, Window};

/// Result of one sample batch.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome<S: Scalar = f64> {
    pub accepted: usize,
    pub dropped: usize,
    /// Log records written, in seq order.
    pub events: Vec<SessionEvent<S>>,
}

/// Stats and frame records written by one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput<S: Scalar = f64> {
    pub stats: SessionEvent<S>,
    pub frame: SessionEvent<S>,
}

#[derive(Debug)]
pub struct Session<S: Scalar = f64> {
    meta: SessionMeta<S>,
    log: SessionLog<S>,
    segmenter: SegmenterState,
    events: Vec<ParticipantEvent>,
    joined: BTreeMap<ParticipantId, Timestamp>,
    segments: SegmentIndex,
    clock: Timestamp,
    latest_stats: Option<(u64, IntervalStats<S>)>,
    latest_frame: Option<(u64, MediatorFrame<S>)>,
    dropped_samples: u64,
}

impl<S: Scalar> Session<S> {
    pub fn create(store: &Store<S>, meta: SessionMeta<S>) -> Result<Self, StoreError> {
        let log = store.create(meta.clone())?;
        Ok(Self::empty(meta, log))
    }

    fn empty(meta: SessionMeta<S>, log: SessionLog<S>) -> Self {
        Session {
            clock: meta.created,
            meta,
            log,
            segmenter: SegmenterState::new(),
            events: Vec::new(),
            joined: BTreeMap::new(),
            segments: SegmentIndex::new(),
            latest_stats: None,
            latest_frame: None,
            dropped_samples: 0,
        }
    }

    /// Rebuilds a session from its log.
    ///
    /// Segmenter state and the segment index are re-derived from the logged
    /// samples and participant events, so a crash between writing a batch and
    /// writing its segments loses nothing.
    pub fn restore(store: &Store<S>, id: &SessionId) -> Result<(Self, ReplayOutcome), StoreError> {
        let meta = store.read_meta(id)?;
        let mut replayed = Vec::new();
        let (log, outcome) = store.reopen(id, |ev| replayed.push(ev))?;
        let mut session = Self::empty(meta, log);
        for ev in replayed {
            session.apply_replayed(ev);
        }
        if session.meta.closed {
            for seg in session.segmenter.flush(&session.meta.segmenter) {
                session.segments.insert(seg);
            }
        }
        Ok((session, outcome))
    }

    fn apply_replayed(&mut self, ev: SessionEvent<S>) {
        match ev.payload {
            EventPayload::SampleBatch(samples) => {
                for s in &samples {
                    self.clock = self.clock.max(s.t);
                    match self.segmenter.ingest_sample(s, &self.meta.segmenter) {
                        Ok(Some(seg)) => self.segments.insert(seg),
                        Ok(None) => {}
                        Err(e) => tracing::warn!(session = %self.meta.session, "replayed sample rejected: {e}"),
                    }
                }
            }
            EventPayload::ParticipantEvent(pe) => {
                self.clock = self.clock.max(pe.t);
                match pe.kind {
                    ParticipantEventKind::Join => {
                        self.joined.insert(pe.participant.clone(), pe.t);
                    }
                    ParticipantEventKind::Leave => {
                        self.joined.remove(&pe.participant);
                        if let Some(seg) = self.segmenter.flush_participant(&pe.participant, &self.meta.segmenter) {
                            self.segments.insert(seg);
                        }
                    }
                }
                self.events.push(pe);
            }
            // derived from samples above
            EventPayload::Segment(_) => {}
            EventPayload::Stats(st) => self.latest_stats = Some((ev.seq, st)),
            EventPayload::Frame(f) => self.latest_frame = Some((ev.seq, f)),
        }
    }

    pub fn id(&self) -> &SessionId {
        &self.meta.session
    }

    pub fn meta(&self) -> &SessionMeta<S> {
        &self.meta
    }

    pub fn is_closed(&self) -> bool {
        self.log.is_closed()
    }

    /// Latest timestamp observed on the session timeline.
    pub fn clock(&self) -> Timestamp {
        self.clock
    }

    pub fn participants(&self) -> Vec<ParticipantId> {
        let mut v: Vec<_> = self.joined.iter().map(|(p, t)| (*t, p.clone())).collect();
        v.sort();
        v.into_iter().map(|(_, p)| p).collect()
    }

    pub fn participant_events(&self) -> &[ParticipantEvent] {
        &self.events
    }

    pub fn dropped_samples(&self) -> u64 {
        self.dropped_samples
    }

    pub fn segments(&self) -> &SegmentIndex {
        &self.segments
    }

    pub fn query_segments(&self, from: Timestamp, to: Timestamp) -> Result<Vec<SpeakingSegment>, StoreError> {
        self.segments.query(from, to)
    }

    pub fn latest_stats(&self) -> Option<(u64, &IntervalStats<S>)> {
        self.latest_stats.as_ref().map(|(seq, s)| (*seq, s))
    }

    pub fn latest_frame(&self) -> Option<(u64, &MediatorFrame<S>)> {
        self.latest_frame.as_ref().map(|(seq, f)| (*seq, f))
    }

    /// Statistics served before the first tick: zeroed, stamped at creation.
    pub fn initial_stats(&self) -> IntervalStats<S> {
        let at = self.meta.created;
        IntervalStats::zeroed(self.meta.session.clone(), at, Window::new(at, at), self.participants())
    }

    pub fn initial_frame(&self) -> MediatorFrame<S> {
        compute_frame(&self.initial_stats(), None, &self.meta.analytics)
            .expect("membership is capped at MAX_PARTICIPANTS")
    }

    fn ensure_open(&self) -> Result<(), StoreError> {
        if self.log.is_closed() {
            Err(StoreError::SessionClosed(self.meta.session.clone()))
        } else {
            Ok(())
        }
    }

    pub fn join(
        &mut self,
        participant: ParticipantId,
        t: Option<Timestamp>,
        recv: Timestamp,
    ) -> Result<SessionEvent<S>, SessionError> {
        self.ensure_open()?;
        if self.joined.contains_key(&participant) {
            return Err(SessionError::AlreadyJoined(participant));
        }
        if self.joined.len() >= MAX_PARTICIPANTS {
            return Err(SessionError::Full(self.joined.len()));
        }
        let t = t.unwrap_or(self.clock);
        let pe = ParticipantEvent::join(participant.clone(), t);
        let ev = self.log.append(recv, EventPayload::ParticipantEvent(pe.clone()))?;
        self.clock = self.clock.max(t);
        self.joined.insert(participant, t);
        self.events.push(pe);
        Ok(ev)
    }

    /// Records the leave and closes the participant's open speech run.
    pub fn leave(
        &mut self,
        participant: &ParticipantId,
        t: Option<Timestamp>,
        recv: Timestamp,
    ) -> Result<Vec<SessionEvent<S>>, SessionError> {
        self.ensure_open()?;
        if !self.joined.contains_key(participant) {
            return Err(SessionError::NotJoined(participant.clone()));
        }
        let t = t.unwrap_or(self.clock);
        let pe = ParticipantEvent::leave(participant.clone(), t);
        let mut out = vec![self.log.append(recv, EventPayload::ParticipantEvent(pe.clone()))?];
        self.clock = self.clock.max(t);
        self.joined.remove(participant);
        self.events.push(pe);
        if let Some(seg) = self.segmenter.flush_participant(participant, &self.meta.segmenter) {
            out.push(self.log.append(recv, EventPayload::Segment(seg.clone()))?);
            self.segments.insert(seg);
        }
        Ok(out)
    }

    /// Validates, persists and segments a batch. Samples outside [0,1], from
    /// participants not currently joined, or earlier than that participant's
    /// previous sample are dropped.
    pub fn ingest(&mut self, samples: Vec<VolumeSample<S>>, recv: Timestamp) -> Result<IngestOutcome<S>, SessionError> {
        self.ensure_open()?;
        let total = samples.len();
        let mut last: BTreeMap<ParticipantId, Timestamp> = BTreeMap::new();
        let mut accepted = Vec::with_capacity(total);
        for s in samples {
            if !s.volume_in_range() || !self.joined.contains_key(&s.participant) {
                continue;
            }
            let prev = last.get(&s.participant).copied().or_else(|| self.segmenter.last_sample(&s.participant));
            if prev.is_some_and(|p| s.t < p) {
                continue;
            }
            last.insert(s.participant.clone(), s.t);
            accepted.push(s);
        }
        let dropped = total - accepted.len();
        self.dropped_samples += dropped as u64;
        if accepted.is_empty() {
            return Ok(IngestOutcome { accepted: 0, dropped, events: Vec::new() });
        }

        let mut events = vec![self.log.append(recv, EventPayload::SampleBatch(accepted.clone()))?];
        for s in &accepted {
            self.clock = self.clock.max(s.t);
            match self.segmenter.ingest_sample(s, &self.meta.segmenter) {
                Ok(Some(seg)) => {
                    events.push(self.log.append(recv, EventPayload::Segment(seg.clone()))?);
                    self.segments.insert(seg);
                }
                Ok(None) => {}
                Err(e) => unreachable!("pre-validated sample rejected: {e}"),
            }
        }
        Ok(IngestOutcome { accepted: accepted.len(), dropped, events })
    }

    /// Immutable inputs for a tick ending at `now`.
    pub fn snapshot(&self, now: Timestamp) -> SessionSnapshot<S> {
        let cfg = self.meta.analytics;
        let window = Window::ending_at(now, cfg.window_ms);
        let mut segments = Vec::new();
        if !window.is_empty() {
            // Widen the query until no same-speaker merge chain can reach
            // into the window from outside it.
            let mut lower = window.from;
            loop {
                segments = self.segments.query(lower, window.to).unwrap_or_default();
                let Some(earliest) = segments.iter().map(|s| s.start).min() else { break };
                let needed = earliest.saturating_sub_ms(cfg.turn_merge_gap_ms + 1);
                if needed >= lower {
                    break;
                }
                lower = needed;
            }
        }
        SessionSnapshot { session: self.meta.session.clone(), segments, events: self.events.clone(), cfg }
    }

    /// Persists computed stats and the frame derived from them.
    pub fn publish_stats(&mut self, stats: IntervalStats<S>, recv: Timestamp) -> Result<TickOutput<S>, StoreError> {
        let prev = self.latest_frame.as_ref().map(|(_, f)| f);
        let frame = compute_frame(&stats, prev, &self.meta.analytics)
            .expect("membership is capped at MAX_PARTICIPANTS");
        let stats_ev = self.log.append(recv, EventPayload::Stats(stats.clone()))?;
        let frame_ev = self.log.append(recv, EventPayload::Frame(frame.clone()))?;
        self.latest_stats = Some((stats_ev.seq, stats));
        self.latest_frame = Some((frame_ev.seq, frame));
        Ok(TickOutput { stats: stats_ev, frame: frame_ev })
    }

    /// Computes and publishes one tick.
    pub fn tick(&mut self, now: Timestamp, recv: Timestamp) -> Result<TickOutput<S>, SessionError> {
        let stats = self.snapshot(now).compute(now).map_err(SessionError::Tick)?;
        Ok(self.publish_stats(stats, recv)?)
    }

    /// Flushes every open run and marks the session closed.
    pub fn close(&mut self, store: &Store<S>, recv: Timestamp) -> Result<Vec<SessionEvent<S>>, StoreError> {
        self.ensure_open()?;
        let mut out = Vec::new();
        for seg in self.segmenter.flush(&self.meta.segmenter) {
            out.push(self.log.append(recv, EventPayload::Segment(seg.clone()))?);
            self.segments.insert(seg);
        }
        store.close(&self.meta.session)?;
        self.meta.closed = true;
        self.log.mark_closed();
        Ok(out)
    }
}
