use std::collections::BTreeMap;

use breakout_core::{
    compute_interval_stats, derive_turns, transition_matrix, AnalyticsConfig, IntervalStats, ParticipantEvent,
    ParticipantId, SessionId, SpeakingSegment, Timestamp, TransitionMatrix, Turn, Window,
};
use breakout_testkit::{count_pairs, random_segments, rng, stats_by_discretization, CELL_MS};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn pid(s: &str) -> ParticipantId {
    ParticipantId::new(s).unwrap()
}

fn to_segments(raw: &[(String, u64, u64)]) -> Vec<SpeakingSegment> {
    raw.iter().map(|(p, s, e)| SpeakingSegment::new(pid(p), Timestamp(*s), Timestamp(*e))).collect()
}

fn str_map(m: &BTreeMap<ParticipantId, u64>) -> BTreeMap<String, u64> {
    m.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[test]
fn stats_match_discretized_timeline() {
    let mut r = rng(42);
    for case in 0..200 {
        let n = r.random_range(1..=6);
        let span = r.random_range(20_000..200_000u64);
        let raw = random_segments(&mut r, n, span);
        let cfg = AnalyticsConfig::<f64> {
            window_ms: r.random_range(1..=12) * 10_000,
            turn_merge_gap_ms: r.random_range(1..=200) * CELL_MS,
            tick_ms: 5_000,
            ..Default::default()
        };
        let now = Timestamp(r.random_range(0..span + 20_000) / CELL_MS * CELL_MS);
        let window = Window::ending_at(now, cfg.window_ms);
        // some participants left before the window end
        let names: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let mut events: Vec<ParticipantEvent> = names.iter().map(|p| ParticipantEvent::join(pid(p), Timestamp(0))).collect();
        let mut present = names.clone();
        if n > 1 && r.random_bool(0.3) {
            events.push(ParticipantEvent::leave(pid(&names[0]), Timestamp(1)));
            present.remove(0);
        }

        let segments = to_segments(&raw);
        let in_range: Vec<_> = segments.iter().filter(|s| s.start < window.to).cloned().collect();
        let turns = derive_turns(&in_range, &cfg);
        let got: IntervalStats = compute_interval_stats(&SessionId::new("s").unwrap(), &in_range, &turns, &events, window, &cfg);

        let raw_in: Vec<_> = raw.iter().filter(|s| s.1 < window.to.0).cloned().collect();
        let want = stats_by_discretization(&raw_in, &present, (window.from.0, window.to.0), cfg.window_ms, cfg.turn_merge_gap_ms);

        assert_eq!(str_map(&got.speaking_events), want.speaking_events, "case {case}");
        assert_eq!(str_map(&got.turns), want.turns, "case {case}");
        assert_eq!(got.transitions.counts, want.transition_counts, "case {case}");
        for (p, ms) in str_map(&got.speaking_time_ms) {
            assert!(ms.abs_diff(want.speaking_time_ms[&p]) <= 50, "case {case}");
        }
        assert!((got.turn_taking_per_min - want.turn_taking_per_min).abs() < 1e-9, "case {case}");
        assert!((got.overlap_pct - want.overlap_pct).abs() <= 0.01, "case {case}");
        assert_eq!(got.participants_present.iter().map(|p| p.to_string()).collect::<Vec<_>>(), present);
    }
}

fn random_turns(r: &mut impl Rng, n: usize, len: usize) -> Vec<Turn> {
    (0..len)
        .map(|k| Turn { participant: pid(&format!("p{}", r.random_range(0..n))), start: Timestamp(k as u64 * 10), end: Timestamp(k as u64 * 10 + 5) })
        .collect()
}

#[test]
fn transition_counts_match_pair_enumeration() {
    let mut r = rng(9);
    for _ in 0..500 {
        let n = r.random_range(1..=8);
        let len = r.random_range(0..60);
        let turns = random_turns(&mut r, n, len);
        let names: Vec<_> = (0..n).map(|i| pid(&format!("p{i}"))).collect();
        let m: TransitionMatrix = transition_matrix(&turns, &names);
        let seq: Vec<usize> = turns.iter().map(|t| names.iter().position(|p| *p == t.participant).unwrap()).collect();
        assert_eq!(m.counts, count_pairs(&seq, n));

        assert_eq!(m.total(), turns.len().saturating_sub(1) as u64);
        for row in &m.probabilities {
            assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
            let s: f64 = row.iter().sum();
            assert!(s == 0.0 || (s - 1.0).abs() <= 1e-9);
        }

        // relabeling equivariance
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let permuted: Vec<_> = perm.iter().map(|&i| names[i].clone()).collect();
        let pm: TransitionMatrix = transition_matrix(&turns, &permuted);
        for a in 0..n {
            for b in 0..n {
                assert_eq!(pm.counts[a][b], m.counts[perm[a]][perm[b]]);
                assert_eq!(pm.probabilities[a][b], m.probabilities[perm[a]][perm[b]]);
            }
        }
    }
}

#[test]
fn quiet_interval_keeps_stats() {
    let segs = vec![
        SpeakingSegment::new(pid("a"), Timestamp(10_000), Timestamp(12_000)),
        SpeakingSegment::new(pid("b"), Timestamp(11_000), Timestamp(15_000)),
    ];
    let events = [ParticipantEvent::join(pid("a"), Timestamp(0)), ParticipantEvent::join(pid("b"), Timestamp(0))];
    let cfg = AnalyticsConfig::default();
    let turns = derive_turns(&segs, &cfg);
    let at = |to: u64| -> IntervalStats {
        let mut st = compute_interval_stats(&SessionId::new("s").unwrap(), &segs, &turns, &events, Window::ending_at(Timestamp(to), 60_000), &cfg);
        st.tick = Timestamp(0);
        st.window = Window::new(Timestamp(0), Timestamp(0));
        st
    };
    // both windows contain every event
    assert_eq!(at(20_000), at(60_000));
}

proptest! {
    #[test]
    fn overlap_pct_bounds(raw in prop::collection::vec((0usize..3, 0u64..500, 1u64..200), 0..15)) {
        let segs: Vec<_> = raw.iter().map(|&(p, s, l)| SpeakingSegment::new(pid(&format!("p{p}")), Timestamp(s), Timestamp(s + l))).collect();
        let cfg = AnalyticsConfig::default();
        let w = Window::new(Timestamp(0), Timestamp(1000));
        let st: IntervalStats = compute_interval_stats(&SessionId::new("s").unwrap(), &segs, &derive_turns(&segs, &cfg), &[], w, &cfg);
        prop_assert!((0.0..=1.0).contains(&st.overlap_pct));
        let speakers: std::collections::BTreeSet<_> = segs.iter().map(|s| &s.participant).collect();
        if speakers.len() <= 1 {
            prop_assert_eq!(st.overlap_pct, 0.0);
        }
        prop_assert!(st.turn_taking_per_min >= 0.0);
    }

    #[test]
    fn identical_speech_is_full_overlap(s in 0u64..500, len in 1u64..500) {
        let segs = vec![
            SpeakingSegment::new(pid("a"), Timestamp(s), Timestamp(s + len)),
            SpeakingSegment::new(pid("b"), Timestamp(s), Timestamp(s + len)),
        ];
        let cfg = AnalyticsConfig::default();
        let st: IntervalStats = compute_interval_stats(&SessionId::new("s").unwrap(), &segs, &[], &[], Window::new(Timestamp(0), Timestamp(1000)), &cfg);
        prop_assert_eq!(st.overlap_pct, 1.0);
    }
}
