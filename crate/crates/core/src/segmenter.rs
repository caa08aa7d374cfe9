//! Volume-threshold speech segmentation.
//!
//! Each participant's samples are classified against `volume_threshold`.
//! Consecutive above-threshold samples no more than `merge_gap_ms` apart belong
//! to the same run, so short dips are bridged before anything is filtered. A
//! run ends at its last above-threshold sample and is emitted only if it lasts
//! at least `min_segment_ms`. Because runs only close across gaps wider than
//! `merge_gap_ms`, emitted segments of one participant are always separated by
//! more than that gap and never need a second merge pass.

use std::collections::{BTreeMap, HashMap};

use crate::config::SegmenterConfig;
use crate::error::SampleError;
use crate::event::{SpeakingSegment, VolumeSample};
use crate::id::ParticipantId;
use crate::scalar::Scalar;
use crate::time::{Timestamp, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Run {
    start: Timestamp,
    last_above: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Track {
    last_sample: Option<Timestamp>,
    run: Option<Run>,
}

/// Streaming segmenter for every participant of one session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SegmenterState {
    tracks: HashMap<ParticipantId, Track>,
    dropped: u64,
}

fn close(participant: &ParticipantId, run: Run, min_segment_ms: u64) -> Option<SpeakingSegment> {
    (run.last_above.since(run.start) >= min_segment_ms)
        .then(|| SpeakingSegment::new(participant.clone(), run.start, run.last_above))
}

impl SegmenterState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Samples rejected so far (out of order or out of range).
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Time of the last accepted sample for `participant`.
    pub fn last_sample(&self, participant: &ParticipantId) -> Option<Timestamp> {
        self.tracks.get(participant).and_then(|t| t.last_sample)
    }

    /// Whether `participant` currently has an unterminated speech run.
    pub fn has_open_run(&self, participant: &ParticipantId) -> bool {
        self.tracks.get(participant).is_some_and(|t| t.run.is_some())
    }

    /// Feeds one sample. Returns the segment closed by it, if any.
    pub fn ingest_sample<S: Scalar>(
        &mut self,
        s: &VolumeSample<S>,
        cfg: &SegmenterConfig<S>,
    ) -> Result<Option<SpeakingSegment>, SampleError> {
        if !s.volume_in_range() {
            self.dropped += 1;
            return Err(SampleError::VolumeOutOfRange(s.volume.to_string()));
        }
        let track = self.tracks.entry(s.participant.clone()).or_default();
        if let Some(last) = track.last_sample {
            if s.t < last {
                self.dropped += 1;
                return Err(SampleError::OutOfOrder { participant: s.participant.clone(), t: s.t, last });
            }
        }
        track.last_sample = Some(s.t);

        let above = s.volume >= cfg.volume_threshold;
        let mut emitted = None;
        if let Some(run) = track.run {
            if s.t.since(run.last_above) > cfg.merge_gap_ms {
                // No later sample can bridge back to this run.
                emitted = close(&s.participant, run, cfg.min_segment_ms);
                track.run = None;
            }
        }
        if above {
            match &mut track.run {
                Some(run) => run.last_above = s.t,
                None => track.run = Some(Run { start: s.t, last_above: s.t }),
            }
        }
        Ok(emitted)
    }

    /// Closes every open run, emitting those that meet the minimum duration.
    /// Output is sorted by participant.
    pub fn flush<S: Scalar>(&mut self, cfg: &SegmenterConfig<S>) -> Vec<SpeakingSegment> {
        let mut out: Vec<_> = self
            .tracks
            .iter_mut()
            .filter_map(|(p, t)| t.run.take().and_then(|r| close(p, r, cfg.min_segment_ms)))
            .collect();
        out.sort_by(|a, b| a.participant.cmp(&b.participant));
        out
    }

    /// Closes the open run of a single participant (used when they leave).
    pub fn flush_participant<S: Scalar>(
        &mut self,
        participant: &ParticipantId,
        cfg: &SegmenterConfig<S>,
    ) -> Option<SpeakingSegment> {
        let run = self.tracks.get_mut(participant)?.run.take()?;
        close(participant, run, cfg.min_segment_ms)
    }
}

/// Maximal disjoint sub-intervals of `window` during which at least two
/// distinct participants have an active segment. Segments are treated as
/// half-open `[start, end)`.
pub fn overlap_intervals(segments: &[SpeakingSegment], window: Window) -> Vec<(Timestamp, Timestamp)> {
    // (time, is_start, participant)
    let mut edges: Vec<(Timestamp, bool, &ParticipantId)> = Vec::with_capacity(segments.len() * 2);
    for seg in segments {
        if let Some((s, e)) = window.clip(seg.start, seg.end) {
            edges.push((s, true, &seg.participant));
            edges.push((e, false, &seg.participant));
        }
    }
    edges.sort_by_key(|&(t, _, _)| t);

    let mut active: BTreeMap<&ParticipantId, u32> = BTreeMap::new();
    let mut out: Vec<(Timestamp, Timestamp)> = Vec::new();
    let mut open_since: Option<Timestamp> = None;
    let mut i = 0;
    while i < edges.len() {
        let t = edges[i].0;
        while i < edges.len() && edges[i].0 == t {
            let (_, is_start, p) = edges[i];
            if is_start {
                *active.entry(p).or_insert(0) += 1;
            } else if let Some(c) = active.get_mut(p) {
                *c -= 1;
                if *c == 0 {
                    active.remove(p);
                }
            }
            i += 1;
        }
        let overlapped = active.len() >= 2;
        match (open_since, overlapped) {
            (None, true) => open_since = Some(t),
            (Some(s), false) => {
                out.push((s, t));
                open_since = None;
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(s: &str) -> ParticipantId {
        ParticipantId::new(s).unwrap()
    }

    fn feed(samples: &[(u64, f64)], cfg: &SegmenterConfig) -> Vec<SpeakingSegment> {
        let mut st = SegmenterState::new();
        let mut out = Vec::new();
        for &(t, v) in samples {
            out.extend(st.ingest_sample(&VolumeSample::new(pid("a"), Timestamp(t), v), cfg).unwrap());
        }
        out.extend(st.flush(cfg));
        out
    }

    fn grid(from: u64, to: u64, v: f64) -> impl Iterator<Item = (u64, f64)> {
        (from..=to).step_by(50).map(move |t| (t, v))
    }

    #[test]
    fn single_run() {
        let cfg = SegmenterConfig::default();
        let samples: Vec<_> = grid(0, 2000, 0.8).chain(grid(2050, 3000, 0.0)).collect();
        let mut st = SegmenterState::new();
        let mut emitted = Vec::new();
        for &(t, v) in &samples {
            emitted.extend(st.ingest_sample(&VolumeSample::new(pid("a"), Timestamp(t), v), &cfg).unwrap());
        }
        // closed by silence past the gap, before any flush
        assert_eq!(emitted, vec![SpeakingSegment::new(pid("a"), Timestamp(0), Timestamp(2000))]);
        assert!(st.flush(&cfg).is_empty());
    }

    #[test]
    fn short_dip_is_bridged() {
        let cfg = SegmenterConfig::default();
        let samples: Vec<_> = grid(0, 1000, 0.8).chain(grid(1050, 1200, 0.05)).chain(grid(1250, 2500, 0.8)).collect();
        assert_eq!(feed(&samples, &cfg), vec![SpeakingSegment::new(pid("a"), Timestamp(0), Timestamp(2500))]);
    }

    #[test]
    fn short_blip_is_discarded() {
        let cfg = SegmenterConfig::default();
        let samples: Vec<_> = grid(0, 200, 0.8).chain(grid(250, 2000, 0.0)).collect();
        assert!(feed(&samples, &cfg).is_empty());
    }

    #[test]
    fn merge_happens_before_duration_filter() {
        // two 300 ms bursts 200 ms apart make one 800 ms segment
        let cfg = SegmenterConfig::default();
        let samples: Vec<_> = grid(0, 300, 0.9).chain(grid(350, 450, 0.0)).chain(grid(500, 800, 0.9)).collect();
        assert_eq!(feed(&samples, &cfg), vec![SpeakingSegment::new(pid("a"), Timestamp(0), Timestamp(800))]);
    }

    #[test]
    fn flush_cases() {
        let cfg = SegmenterConfig::default();
        assert_eq!(feed(&grid(0, 800, 0.8).collect::<Vec<_>>(), &cfg).len(), 1);
        assert!(feed(&grid(0, 300, 0.8).collect::<Vec<_>>(), &cfg).is_empty());
        let mut st = SegmenterState::new();
        assert!(st.flush(&cfg).is_empty());
    }

    #[test]
    fn out_of_order_is_dropped() {
        let cfg = SegmenterConfig::default();
        let mut st = SegmenterState::new();
        st.ingest_sample(&VolumeSample::new(pid("a"), Timestamp(100), 0.9), &cfg).unwrap();
        let err = st.ingest_sample(&VolumeSample::new(pid("a"), Timestamp(50), 0.9), &cfg).unwrap_err();
        assert!(matches!(err, SampleError::OutOfOrder { .. }));
        // other participants are independent
        st.ingest_sample(&VolumeSample::new(pid("b"), Timestamp(50), 0.9), &cfg).unwrap();
        assert!(st.ingest_sample(&VolumeSample::new(pid("a"), Timestamp(2000), 1.7), &cfg).is_err());
        assert_eq!(st.dropped(), 2);
    }

    #[test]
    fn flush_participant_only_touches_one_track() {
        let cfg = SegmenterConfig::default();
        let mut st = SegmenterState::new();
        for t in (0..=1000).step_by(50) {
            for p in ["a", "b"] {
                st.ingest_sample(&VolumeSample::new(pid(p), Timestamp(t), 0.9), &cfg).unwrap();
            }
        }
        assert_eq!(st.flush_participant(&pid("a"), &cfg).unwrap().end, Timestamp(1000));
        assert!(!st.has_open_run(&pid("a")));
        assert!(st.has_open_run(&pid("b")));
    }

    #[test]
    fn overlap_examples() {
        let seg = |p: &str, s, e| SpeakingSegment::new(pid(p), Timestamp(s), Timestamp(e));
        let w = |a, b| Window::new(Timestamp(a), Timestamp(b));
        assert_eq!(
            overlap_intervals(&[seg("a", 0, 10_000), seg("b", 0, 10_000)], w(0, 10_000)),
            vec![(Timestamp(0), Timestamp(10_000))]
        );
        assert!(overlap_intervals(&[seg("a", 0, 10_000), seg("b", 20_000, 30_000)], w(0, 30_000)).is_empty());
        assert_eq!(
            overlap_intervals(&[seg("a", 0, 10_000), seg("b", 5_000, 15_000)], w(0, 15_000)),
            vec![(Timestamp(5_000), Timestamp(10_000))]
        );
        // touching segments do not overlap; adjacent overlaps coalesce
        assert!(overlap_intervals(&[seg("a", 0, 10), seg("b", 10, 20)], w(0, 20)).is_empty());
        assert_eq!(
            overlap_intervals(&[seg("a", 0, 20), seg("b", 0, 10), seg("c", 10, 30)], w(0, 30)),
            vec![(Timestamp(0), Timestamp(20))]
        );
        // clipped to the window
        assert_eq!(
            overlap_intervals(&[seg("a", 0, 100), seg("b", 0, 100)], w(40, 60)),
            vec![(Timestamp(40), Timestamp(60))]
        );
    }
}
