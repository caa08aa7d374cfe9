//! Windowed group-dynamics statistics: speaking events, response patterns,
//! turn-taking rate and overlapped speaking share.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use crate::config::AnalyticsConfig;
use crate::event::{ParticipantEvent, ParticipantEventKind, SpeakingSegment};
use crate::id::{ParticipantId, SessionId};
use crate::scalar::Scalar;
use crate::segmenter::overlap_intervals;
use crate::time::{Timestamp, Window};

/// One or more same-speaker segments separated by short gaps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    pub participant: ParticipantId,
    pub start: Timestamp,
    pub end: Timestamp,
}

/// Next-speaker counts and their row-normalized probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TransitionMatrix<S: Scalar = f64> {
    pub participants: Vec<ParticipantId>,
    pub counts: Vec<Vec<u64>>,
    pub probabilities: Vec<Vec<S>>,
}

impl<S: Scalar> TransitionMatrix<S> {
    pub fn empty(participants: Vec<ParticipantId>) -> Self {
        let n = participants.len();
        TransitionMatrix {
            participants,
            counts: vec![vec![0; n]; n],
            probabilities: vec![vec![S::zero(); n]; n],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn index_of(&self, p: &ParticipantId) -> Option<usize> {
        self.participants.iter().position(|q| q == p)
    }

    /// Probability that `to` holds the next turn after `from`.
    pub fn probability(&self, from: &ParticipantId, to: &ParticipantId) -> Option<S> {
        Some(self.probabilities[self.index_of(from)?][self.index_of(to)?])
    }

    fn normalize(&mut self) {
        for (counts, probs) in self.counts.iter().zip(self.probabilities.iter_mut()) {
            let total: u64 = counts.iter().sum();
            for (c, p) in counts.iter().zip(probs.iter_mut()) {
                *p = if total == 0 { S::zero() } else { S::of_u64(*c) / S::of_u64(total) };
            }
        }
    }
}

/// Statistics of one session over one sliding window, stamped at a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct IntervalStats<S: Scalar = f64> {
    pub session: SessionId,
    pub tick: Timestamp,
    pub window: Window,
    pub speaking_events: BTreeMap<ParticipantId, u64>,
    pub speaking_time_ms: BTreeMap<ParticipantId, u64>,
    pub turns: BTreeMap<ParticipantId, u64>,
    pub transitions: TransitionMatrix<S>,
    pub turn_taking_per_min: S,
    pub overlap_pct: S,
    pub participants_present: Vec<ParticipantId>,
}

impl<S: Scalar> IntervalStats<S> {
    /// All-zero statistics for the given participants.
    pub fn zeroed(session: SessionId, tick: Timestamp, window: Window, present: Vec<ParticipantId>) -> Self {
        let zeros: BTreeMap<_, _> = present.iter().map(|p| (p.clone(), 0)).collect();
        IntervalStats {
            session,
            tick,
            window,
            speaking_events: zeros.clone(),
            speaking_time_ms: zeros.clone(),
            turns: zeros,
            transitions: TransitionMatrix::empty(present.clone()),
            turn_taking_per_min: S::zero(),
            overlap_pct: S::zero(),
            participants_present: present,
        }
    }
}

/// Coalesces each participant's segments separated by at most
/// `turn_merge_gap_ms` into turns, sorted by start (ties by participant).
pub fn derive_turns<S: Scalar>(segments: &[SpeakingSegment], cfg: &AnalyticsConfig<S>) -> Vec<Turn> {
    let mut by_participant: BTreeMap<&ParticipantId, Vec<&SpeakingSegment>> = BTreeMap::new();
    for seg in segments {
        by_participant.entry(&seg.participant).or_default().push(seg);
    }
    let mut turns = Vec::new();
    for (participant, mut segs) in by_participant {
        segs.sort_by_key(|s| s.start);
        let mut current: Option<Turn> = None;
        for seg in segs {
            match &mut current {
                Some(turn) if seg.start.since(turn.end) <= cfg.turn_merge_gap_ms => {
                    turn.end = turn.end.max(seg.end);
                }
                _ => {
                    turns.extend(current.take());
                    current = Some(Turn { participant: participant.clone(), start: seg.start, end: seg.end });
                }
            }
        }
        turns.extend(current);
    }
    turns.sort_by(|a, b| a.start.cmp(&b.start).then_with(|| a.participant.cmp(&b.participant)));
    turns
}

/// Counts speaker-to-next-speaker pairs over a start-ordered turn sequence.
/// Pairs involving a speaker outside `participants` are skipped.
pub fn transition_matrix<S: Scalar>(turns: &[Turn], participants: &[ParticipantId]) -> TransitionMatrix<S> {
    let mut m = TransitionMatrix::empty(participants.to_vec());
    let index: HashMap<&ParticipantId, usize> = participants.iter().enumerate().map(|(i, p)| (p, i)).collect();
    for pair in turns.windows(2) {
        if let (Some(&i), Some(&j)) = (index.get(&pair[0].participant), index.get(&pair[1].participant)) {
            m.counts[i][j] += 1;
        }
    }
    m.normalize();
    m
}

/// Participants with a JOIN not yet followed by a LEAVE at or before `at`,
/// ordered by the time of that JOIN.
pub fn participants_present(events: &[ParticipantEvent], at: Timestamp) -> Vec<ParticipantId> {
    let mut joined: Vec<(Timestamp, usize, &ParticipantId)> = Vec::new();
    for (i, ev) in events.iter().enumerate().filter(|(_, e)| e.t <= at) {
        match ev.kind {
            ParticipantEventKind::Join => {
                if !joined.iter().any(|(_, _, p)| *p == &ev.participant) {
                    joined.push((ev.t, i, &ev.participant));
                }
            }
            ParticipantEventKind::Leave => joined.retain(|(_, _, p)| *p != &ev.participant),
        }
    }
    joined.sort_by_key(|&(t, i, _)| (t, i));
    joined.into_iter().map(|(_, _, p)| p.clone()).collect()
}

/// Computes every statistic for `window`.
///
/// `segments` may extend past the window: time sums are clipped, event and
/// turn counts include only items that start inside it.
pub fn compute_interval_stats<S: Scalar>(
    session: &SessionId,
    segments: &[SpeakingSegment],
    turns: &[Turn],
    events: &[ParticipantEvent],
    window: Window,
    cfg: &AnalyticsConfig<S>,
) -> IntervalStats<S> {
    let present = participants_present(events, window.to);
    let mut stats = IntervalStats::zeroed(session.clone(), window.to, window, present.clone());

    let mut union_ms = 0u64;
    let mut clipped: Vec<(Timestamp, Timestamp)> = Vec::new();
    for seg in segments {
        if window.contains(seg.start) {
            if let Some(c) = stats.speaking_events.get_mut(&seg.participant) {
                *c += 1;
            }
        }
        if let Some((s, e)) = window.clip(seg.start, seg.end) {
            if let Some(ms) = stats.speaking_time_ms.get_mut(&seg.participant) {
                *ms += e.since(s);
            }
            clipped.push((s, e));
        }
    }
    clipped.sort();
    let mut reach: Option<(Timestamp, Timestamp)> = None;
    for (s, e) in clipped {
        match &mut reach {
            Some((_, re)) if s <= *re => *re = (*re).max(e),
            _ => {
                if let Some((rs, re)) = reach {
                    union_ms += re.since(rs);
                }
                reach = Some((s, e));
            }
        }
    }
    if let Some((rs, re)) = reach {
        union_ms += re.since(rs);
    }

    let overlap_ms: u64 = overlap_intervals(segments, window).iter().map(|(s, e)| e.since(*s)).sum();
    if union_ms > 0 {
        stats.overlap_pct = S::of_u64(overlap_ms) / S::of_u64(union_ms);
    }

    let in_window: Vec<Turn> = turns.iter().filter(|t| window.contains(t.start)).cloned().collect();
    for turn in &in_window {
        if let Some(c) = stats.turns.get_mut(&turn.participant) {
            *c += 1;
        }
    }
    stats.turn_taking_per_min = S::of_u64(in_window.len() as u64) * S::of(60_000.0) / S::of_u64(cfg.window_ms);
    stats.transitions = transition_matrix(&in_window, &present);
    stats
}

/// Immutable per-session inputs captured at tick time.
#[derive(Debug, Clone)]
pub struct SessionSnapshot<S: Scalar = f64> {
    pub session: SessionId,
    /// Segments that can influence the window, including any turn chain
    /// reaching into it from earlier.
    pub segments: Vec<SpeakingSegment>,
    pub events: Vec<ParticipantEvent>,
    pub cfg: AnalyticsConfig<S>,
}

impl<S: Scalar> SessionSnapshot<S> {
    pub fn compute(&self, now: Timestamp) -> Result<IntervalStats<S>, String> {
        if self.cfg.window_ms == 0 {
            return Err("window_ms must be positive".into());
        }
        if let Some(bad) = self.segments.iter().find(|s| s.start >= s.end) {
            return Err(format!("malformed segment for {} [{}, {}]", bad.participant, bad.start, bad.end));
        }
        let window = Window::ending_at(now, self.cfg.window_ms);
        let segments: Vec<SpeakingSegment> = self.segments.iter().filter(|s| s.start < window.to).cloned().collect();
        let turns = derive_turns(&segments, &self.cfg);
        Ok(compute_interval_stats(&self.session, &segments, &turns, &self.events, window, &self.cfg))
    }
}

#[derive(Debug, Clone, Default)]
pub struct TickReport<S: Scalar = f64> {
    pub stats: Vec<IntervalStats<S>>,
    pub failures: Vec<(SessionId, String)>,
}

/// Computes one [`IntervalStats`] per snapshot over `[now - window_ms, now)`.
/// A failure (error or panic) inside one session's computation is recorded
/// and does not affect the others.
pub fn tick_all<S: Scalar>(sessions: &[SessionSnapshot<S>], now: Timestamp) -> TickReport<S> {
    let mut report = TickReport { stats: Vec::with_capacity(sessions.len()), failures: Vec::new() };
    for snap in sessions {
        match catch_unwind(AssertUnwindSafe(|| snap.compute(now))) {
            Ok(Ok(stats)) => report.stats.push(stats),
            Ok(Err(msg)) => {
                tracing::error!(session = %snap.session, "tick failed: {msg}");
                report.failures.push((snap.session.clone(), msg));
            }
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panic".into());
                tracing::error!(session = %snap.session, "tick failed: {msg}");
                report.failures.push((snap.session.clone(), msg));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(s: &str) -> ParticipantId {
        ParticipantId::new(s).unwrap()
    }

    fn seg(p: &str, s: u64, e: u64) -> SpeakingSegment {
        SpeakingSegment::new(pid(p), Timestamp(s), Timestamp(e))
    }

    fn turn(p: &str, s: u64, e: u64) -> Turn {
        Turn { participant: pid(p), start: Timestamp(s), end: Timestamp(e) }
    }

    fn sid() -> SessionId {
        SessionId::new("s").unwrap()
    }

    #[test]
    fn turn_derivation_examples() {
        let cfg = AnalyticsConfig::<f64>::default();
        assert_eq!(derive_turns(&[seg("a", 0, 1000), seg("a", 1500, 2000)], &cfg), vec![turn("a", 0, 2000)]);
        assert_eq!(derive_turns(&[seg("a", 0, 1000), seg("a", 3000, 4000)], &cfg).len(), 2);
        assert!(derive_turns(&[], &cfg).is_empty());
        // other speakers do not interrupt a participant's merge chain
        let turns = derive_turns(&[seg("a", 0, 1000), seg("b", 1100, 1400), seg("a", 1500, 2000)], &cfg);
        assert_eq!(turns, vec![turn("a", 0, 2000), turn("b", 1100, 1400)]);
    }

    #[test]
    fn alternating_speakers() {
        let turns = [turn("a", 0, 1), turn("b", 2, 3), turn("a", 4, 5), turn("b", 6, 7)];
        let m: TransitionMatrix = transition_matrix(&turns, &[pid("a"), pid("b")]);
        assert_eq!(m.probabilities, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(m.total(), 3);

        let single: TransitionMatrix = transition_matrix(&turns[..1], &[pid("a"), pid("b")]);
        assert_eq!(single.total(), 0);
    }

    #[test]
    fn overlap_fraction_of_union() {
        let segs = [seg("a", 0, 10_000), seg("b", 5_000, 15_000)];
        let present = [ParticipantEvent::join(pid("a"), Timestamp(0)), ParticipantEvent::join(pid("b"), Timestamp(0))];
        let cfg = AnalyticsConfig::default();
        let turns = derive_turns(&segs, &cfg);
        let w = Window::new(Timestamp(0), Timestamp(60_000));
        let st: IntervalStats = compute_interval_stats(&sid(), &segs, &turns, &present, w, &cfg);
        assert!((st.overlap_pct - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(st.speaking_time_ms[&pid("a")], 10_000);
        assert_eq!(st.speaking_events[&pid("b")], 1);
        assert_eq!(st.turn_taking_per_min, 2.0);
    }

    #[test]
    fn turn_rate_formula() {
        let segs: Vec<_> = (0..12).map(|i| seg(if i % 2 == 0 { "a" } else { "b" }, i * 5000, i * 5000 + 2000)).collect();
        let cfg = AnalyticsConfig::default();
        let turns = derive_turns(&segs, &cfg);
        let st: IntervalStats =
            compute_interval_stats(&sid(), &segs, &turns, &[], Window::new(Timestamp(0), Timestamp(60_000)), &cfg);
        assert_eq!(st.turn_taking_per_min, 12.0);
        // no one joined: maps are empty
        assert!(st.turns.is_empty());
    }

    #[test]
    fn empty_inputs_give_zeros() {
        let ev = [ParticipantEvent::join(pid("a"), Timestamp(0))];
        let cfg = AnalyticsConfig::default();
        let st: IntervalStats =
            compute_interval_stats(&sid(), &[], &[], &ev, Window::new(Timestamp(0), Timestamp(60_000)), &cfg);
        assert_eq!(st, IntervalStats::zeroed(sid(), Timestamp(60_000), st.window, vec![pid("a")]));
    }

    #[test]
    fn edge_segments_clip_but_count_at_start() {
        let ev = [ParticipantEvent::join(pid("a"), Timestamp(0))];
        let segs = [seg("a", 500, 1500), seg("a", 9_500, 12_000)];
        let cfg = AnalyticsConfig { window_ms: 10_000, tick_ms: 1_000, ..Default::default() };
        let turns = derive_turns(&segs, &cfg);
        let st: IntervalStats =
            compute_interval_stats(&sid(), &segs, &turns, &ev, Window::new(Timestamp(1000), Timestamp(11_000)), &cfg);
        assert_eq!(st.speaking_events[&pid("a")], 1);
        assert_eq!(st.speaking_time_ms[&pid("a")], 500 + 1500);
    }

    #[test]
    fn presence_follows_join_leave() {
        let ev = [
            ParticipantEvent::join(pid("b"), Timestamp(5)),
            ParticipantEvent::join(pid("a"), Timestamp(10)),
            ParticipantEvent::leave(pid("b"), Timestamp(20)),
            ParticipantEvent::join(pid("b"), Timestamp(30)),
        ];
        assert_eq!(participants_present(&ev, Timestamp(15)), vec![pid("b"), pid("a")]);
        assert_eq!(participants_present(&ev, Timestamp(25)), vec![pid("a")]);
        assert_eq!(participants_present(&ev, Timestamp(30)), vec![pid("a"), pid("b")]);
    }

    #[test]
    fn tick_all_isolates_failures() {
        let ok = SessionSnapshot::<f64> { session: sid(), segments: vec![], events: vec![], cfg: Default::default() };
        let bad = SessionSnapshot::<f64> {
            session: SessionId::new("bad").unwrap(),
            segments: vec![seg("a", 10, 5)],
            events: vec![],
            cfg: Default::default(),
        };
        let report = tick_all(&[ok.clone(), bad, ok], Timestamp(60_000));
        assert_eq!(report.stats.len(), 2);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].0.as_str(), "bad");
        assert!(tick_all::<f64>(&[], Timestamp(0)).stats.is_empty());
    }
}
