use breakout_core::{compute_frame, AnalyticsConfig, IntervalStats, MediatorFrame, ParticipantId, SessionId, Timestamp, Window};
use proptest::prelude::*;

fn stats(turns: &[u64], times: &[u64], rate: f64) -> IntervalStats {
    let present: Vec<_> = (0..turns.len()).map(|i| ParticipantId::new(format!("p{i}")).unwrap()).collect();
    let mut st = IntervalStats::zeroed(SessionId::new("s").unwrap(), Timestamp(0), Window::new(Timestamp(0), Timestamp(0)), present.clone());
    for (i, p) in present.iter().enumerate() {
        st.turns.insert(p.clone(), turns[i]);
        st.speaking_time_ms.insert(p.clone(), times[i]);
    }
    st.turn_taking_per_min = rate;
    st
}

fn arb_case() -> impl Strategy<Value = (Vec<u64>, Vec<u64>, f64)> {
    (1usize..=16).prop_flat_map(|n| {
        (prop::collection::vec(0u64..50, n), prop::collection::vec(0u64..100_000, n), 0.0f64..100.0)
    })
}

proptest! {
    #[test]
    fn ball_stays_in_unit_disc(seq in prop::collection::vec(arb_case(), 1..8), alpha in 0.01f64..=1.0) {
        let cfg = AnalyticsConfig { ball_smoothing_alpha: alpha, ..Default::default() };
        let mut prev: Option<MediatorFrame> = None;
        for (turns, times, rate) in seq {
            let f = compute_frame(&stats(&turns, &times, rate), prev.as_ref(), &cfg).unwrap();
            prop_assert!(f.ball.x.hypot(f.ball.y) <= 1.0 + 1e-12);
            prop_assert!((0.0..=1.0).contains(&f.ball.intensity));
            let total: f64 = f.edges.values().sum();
            if times.iter().sum::<u64>() > 0 {
                prop_assert!((total - 1.0).abs() <= 1e-9);
            } else {
                prop_assert_eq!(total, 0.0);
            }
            prev = Some(f);
        }
    }

    #[test]
    fn scaling_turns_keeps_ball((turns, times, rate) in arb_case(), k in 1u64..20) {
        let cfg = AnalyticsConfig::default();
        let a = compute_frame(&stats(&turns, &times, rate), None, &cfg).unwrap();
        let scaled: Vec<u64> = turns.iter().map(|t| t * k).collect();
        let b = compute_frame(&stats(&scaled, &times, rate), None, &cfg).unwrap();
        prop_assert!((a.ball.x - b.ball.x).abs() < 1e-12 && (a.ball.y - b.ball.y).abs() < 1e-12);
    }

    #[test]
    fn intensity_is_monotone(r1 in 0.0f64..100.0, r2 in 0.0f64..100.0) {
        let cfg = AnalyticsConfig::default();
        let i = |r| compute_frame(&stats(&[1, 1], &[0, 0], r), None, &cfg).unwrap().ball.intensity;
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(i(lo) <= i(hi));
    }

    #[test]
    fn dominant_speaker_pins_ball(n in 1usize..=16, who in 0usize..16, count in 1u64..100) {
        let who = who % n;
        let mut turns = vec![0; n];
        turns[who] = count;
        let cfg = AnalyticsConfig { ball_smoothing_alpha: 1.0, ..Default::default() };
        let f = compute_frame(&stats(&turns, &vec![0; n], 0.0), None, &cfg).unwrap();
        let node = &f.nodes[who];
        prop_assert!((f.ball.x - node.x).hypot(f.ball.y - node.y) < 1e-12);
    }

    #[test]
    fn equal_turns_center_ball(n in 1usize..=16, count in 1u64..100) {
        let f = compute_frame(&stats(&vec![count; n], &vec![0; n], 0.0), None, &AnalyticsConfig::default()).unwrap();
        if n > 1 {
            prop_assert!(f.ball.x.hypot(f.ball.y) < 1e-9);
        }
    }
}

#[test]
fn frame_wire_names() {
    let f = compute_frame(&stats(&[1], &[10], 5.0), None, &AnalyticsConfig::default()).unwrap();
    let v = serde_json::to_value(&f).unwrap();
    for key in ["session", "tick", "nodes", "ball", "edges"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    for key in ["participant", "angle", "x", "y"] {
        assert!(v["nodes"][0].get(key).is_some(), "{key}");
    }
    for key in ["x", "y", "intensity"] {
        assert!(v["ball"].get(key).is_some(), "{key}");
    }
}
