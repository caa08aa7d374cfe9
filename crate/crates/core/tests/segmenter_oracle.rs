use breakout_core::{overlap_intervals, ParticipantId, SegmenterConfig, SegmenterState, SpeakingSegment, Timestamp, VolumeSample, Window};
use breakout_testkit::{random_seg_params, random_volume_stream, rng, segment_timeline};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn pid(i: usize) -> ParticipantId {
    ParticipantId::new(format!("p{i}")).unwrap()
}

fn stream_segments(streams: &[Vec<(u64, f64)>], cfg: &SegmenterConfig) -> Vec<SpeakingSegment> {
    // interleave participants by time, as a live feed would
    let mut all: Vec<(u64, usize, f64)> = streams
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.iter().map(move |&(t, v)| (t, i, v)))
        .collect();
    all.sort_by_key(|&(t, i, _)| (t, i));
    let mut st = SegmenterState::new();
    let mut out = Vec::new();
    for (t, i, v) in all {
        out.extend(st.ingest_sample(&VolumeSample::new(pid(i), Timestamp(t), v), cfg).unwrap());
    }
    out.extend(st.flush(cfg));
    out.sort_by(|a, b| (&a.participant, a.start).cmp(&(&b.participant, b.start)));
    out
}

fn random_cfg(r: &mut ChaCha8Rng) -> SegmenterConfig {
    let p = random_seg_params(r);
    SegmenterConfig { volume_threshold: p.threshold, merge_gap_ms: p.merge_gap, min_segment_ms: p.min_len, sample_period_ms: p.period }
}

#[test]
fn streaming_equals_whole_timeline_oracle() {
    let mut r = rng(0x5e9);
    for case in 0..1000 {
        let cfg = random_cfg(&mut r);
        let n = r.random_range(1..=4);
        let streams: Vec<_> = (0..n)
            .map(|_| {
                let len = r.random_range(0..300);
                random_volume_stream(&mut r, cfg.sample_period_ms, len)
            })
            .collect();
        let got = stream_segments(&streams, &cfg);
        let mut expected = Vec::new();
        for (i, s) in streams.iter().enumerate() {
            for (a, b) in segment_timeline(s, cfg.volume_threshold, cfg.merge_gap_ms, cfg.min_segment_ms) {
                expected.push(SpeakingSegment::new(pid(i), Timestamp(a), Timestamp(b)));
            }
        }
        assert_eq!(got, expected, "case {case} cfg {cfg:?}");
    }
}

#[test]
fn emitted_segments_respect_invariants() {
    let mut r = rng(77);
    for _ in 0..300 {
        let cfg = random_cfg(&mut r);
        let streams: Vec<_> = (0..3).map(|_| random_volume_stream(&mut r, cfg.sample_period_ms, 400)).collect();
        let segs = stream_segments(&streams, &cfg);
        for w in segs.windows(2).filter(|w| w[0].participant == w[1].participant) {
            assert!(w[1].start.since(w[0].end) > cfg.merge_gap_ms);
        }
        for s in &segs {
            assert!(s.start < s.end);
            assert!(s.len_ms() >= cfg.min_segment_ms);
        }
    }
}

#[test]
fn raising_threshold_never_adds_speech() {
    let mut r = rng(1234);
    for _ in 0..300 {
        let cfg = random_cfg(&mut r);
        let streams: Vec<_> = (0..2).map(|_| random_volume_stream(&mut r, cfg.sample_period_ms, 300)).collect();
        let higher = SegmenterConfig { volume_threshold: cfg.volume_threshold + r.random_range(0.0..0.3), ..cfg };
        let total = |c: &SegmenterConfig| stream_segments(&streams, c).iter().map(|s| s.len_ms()).sum::<u64>();
        assert!(total(&higher) <= total(&cfg));
    }
}

fn arb_segments() -> impl Strategy<Value = Vec<SpeakingSegment>> {
    prop::collection::vec((0usize..4, 0u64..2000, 1u64..500), 0..20).prop_map(|v| {
        v.into_iter().map(|(p, s, len)| SpeakingSegment::new(pid(p), Timestamp(s), Timestamp(s + len))).collect()
    })
}

proptest! {
    #[test]
    fn overlap_intervals_are_covered_by_two_speakers(segs in arb_segments(), a in 0u64..1500, len in 1u64..1500) {
        let window = Window::new(Timestamp(a), Timestamp(a + len));
        let out = overlap_intervals(&segs, window);
        for w in out.windows(2) {
            prop_assert!(w[0].1 < w[1].0, "sorted, disjoint and maximal");
        }
        let covered = |t: u64| {
            let mut who: Vec<_> = segs.iter().filter(|s| s.start.0 <= t && t < s.end.0).map(|s| &s.participant).collect();
            who.sort();
            who.dedup();
            who.len()
        };
        for &(s, e) in &out {
            prop_assert!(window.from <= s && e <= window.to && s < e);
            for t in s.0..e.0 {
                prop_assert!(covered(t) >= 2);
            }
        }
        // and nothing is missed
        for t in window.from.0..window.to.0 {
            let inside = out.iter().any(|&(s, e)| s.0 <= t && t < e.0);
            prop_assert_eq!(inside, covered(t) >= 2);
        }
    }
}

