use breakout_core::{generate, transition_matrix, ConversationModel, SegmenterConfig, TransitionMatrix};
use breakout_testkit::max_row_l1;

const THIRTY_MIN: u64 = 30 * 60_000;

#[test]
fn truth_transitions_converge_to_model() {
    let cfg = SegmenterConfig::default();
    let mut distances = Vec::new();
    for seed in 0..5 {
        let model = ConversationModel::<f64>::uniform_off_diagonal(3, seed);
        let g = generate(&model, THIRTY_MIN, &cfg);
        let m: TransitionMatrix = transition_matrix(&g.truth_turns, &model.participant_ids());
        distances.push(max_row_l1(&m.probabilities, &model.matrix));
    }
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    assert!(mean <= 0.1, "seed-averaged L1 {mean} ({distances:?})");
}

#[test]
fn samples_follow_truth() {
    let cfg = SegmenterConfig::default();
    let model = ConversationModel::<f64>::uniform_off_diagonal(4, 1);
    let g = generate(&model, 120_000, &cfg);
    for s in &g.samples {
        let speaking = g.truth_turns.iter().any(|t| t.participant == s.participant && t.start <= s.t && s.t < t.end);
        assert_eq!(speaking, s.volume >= cfg.volume_threshold, "{s:?}");
    }
}
