//! Synthetic meetings with known ground truth.
//!
//! A single-floor Markov conversation: the next speaker is drawn from a
//! row-stochastic matrix, turn lengths are a floor plus an exponential tail,
//! and pauses are exponential. Optionally the next turn starts before the
//! current one ends, to exercise overlap statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::analytics::Turn;
use crate::config::SegmenterConfig;
use crate::event::VolumeSample;
use crate::id::ParticipantId;
use crate::scalar::Scalar;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ConversationModel<S: Scalar = f64> {
    /// Row-stochastic next-speaker matrix; its size is the participant count.
    pub matrix: Vec<Vec<S>>,
    /// Mean turn duration.
    pub turn_length_ms: f64,
    /// Shortest turn; the exponential tail is added on top of it.
    pub min_turn_ms: u64,
    /// Mean silence between turns.
    pub pause_ms: f64,
    pub speak_volume: S,
    pub noise_volume: S,
    /// Half-width of the uniform volume noise.
    pub jitter: S,
    /// Probability that a turn starts before the previous one ends.
    pub overlap_prob: f64,
    pub seed: u64,
}

impl<S: Scalar> ConversationModel<S> {
    /// Uniform next-speaker choice among the other participants (a single
    /// participant always follows themself).
    pub fn uniform_off_diagonal(n: usize, seed: u64) -> Self {
        let matrix = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (n, i == j) {
                        (1, _) => S::one(),
                        (_, true) => S::zero(),
                        _ => S::one() / S::of_u64(n as u64 - 1),
                    })
                    .collect()
            })
            .collect();
        ConversationModel {
            matrix,
            turn_length_ms: 1_200.0,
            min_turn_ms: 800,
            pause_ms: 150.0,
            speak_volume: S::of(0.7),
            noise_volume: S::of(0.05),
            jitter: S::of(0.04),
            overlap_prob: 0.0,
            seed,
        }
    }

    pub fn participants(&self) -> usize {
        self.matrix.len()
    }

    pub fn participant_ids(&self) -> Vec<ParticipantId> {
        (0..self.participants())
            .map(|i| ParticipantId::new(format!("p{i}")).expect("generated ids are valid"))
            .collect()
    }

    /// Lists every violated model invariant.
    pub fn validate(&self, cfg: &SegmenterConfig<S>) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let n = self.matrix.len();
        if n == 0 {
            errs.push("at least one participant is required".to_string());
        }
        for (i, row) in self.matrix.iter().enumerate() {
            if row.len() != n {
                errs.push(format!("row {i} has {} entries, expected {n}", row.len()));
            }
            if row.iter().any(|p| !(*p >= S::zero())) {
                errs.push(format!("row {i} has a negative or NaN entry"));
            }
            let sum: f64 = row.iter().map(|p| p.as_f64()).sum();
            if (sum - 1.0).abs() > 1e-9 {
                errs.push(format!("row {i} sums to {sum}"));
            }
        }
        if !(self.turn_length_ms >= self.min_turn_ms as f64) {
            errs.push("turn_length_ms must be at least min_turn_ms".into());
        }
        if self.min_turn_ms < cfg.min_segment_ms + 2 * cfg.sample_period_ms {
            errs.push("min_turn_ms too short for the segmenter to detect every turn".into());
        }
        if !(self.pause_ms > 0.0) {
            errs.push("pause_ms must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.overlap_prob) {
            errs.push("overlap_prob out of [0,1]".into());
        }
        for (name, v) in [("speak_volume", self.speak_volume), ("noise_volume", self.noise_volume)] {
            if !(v >= S::zero() && v <= S::one()) {
                errs.push(format!("{name} out of [0,1]"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Generated<S: Scalar = f64> {
    /// Time-major, participant-minor; every participant has one sample per
    /// period.
    pub samples: Vec<VolumeSample<S>>,
    /// Sorted by start.
    pub truth_turns: Vec<Turn>,
}

impl<S: Scalar> Generated<S> {
    /// Moves the whole timeline by `offset_ms`.
    pub fn shifted(mut self, offset_ms: u64) -> Self {
        for s in &mut self.samples {
            s.t = s.t + offset_ms;
        }
        for t in &mut self.truth_turns {
            t.start = t.start + offset_ms;
            t.end = t.end + offset_ms;
        }
        self
    }
}

fn draw_row<S: Scalar>(row: &[S], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return j;
        }
    }
    // rounding left a sliver above the last cumulative value
    row.iter().rposition(|p| *p > S::zero()).unwrap_or(0)
}

/// Draws a conversation of `duration_ms` and renders its volume streams at
/// `cfg.sample_period_ms`. Same model and duration give identical output.
pub fn generate<S: Scalar>(model: &ConversationModel<S>, duration_ms: u64, cfg: &SegmenterConfig<S>) -> Generated<S> {
    let n = model.participants();
    let ids = model.participant_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let tail = Exp::new(1.0 / (model.turn_length_ms - model.min_turn_ms as f64).max(1e-9)).expect("positive rate");
    let pause = Exp::new(1.0 / model.pause_ms).expect("positive rate");

    let mut turns = Vec::new();
    let mut speaker = rng.random_range(0..n);
    let mut t = 0.0f64;
    while t < duration_ms as f64 {
        let len = model.min_turn_ms as f64 + tail.sample(&mut rng);
        let end = (t + len).min(duration_ms as f64);
        let (start_ms, end_ms) = (t.round() as u64, end.round() as u64);
        if end_ms > start_ms {
            turns.push(Turn { participant: ids[speaker].clone(), start: Timestamp(start_ms), end: Timestamp(end_ms) });
        }
        let next = draw_row(&model.matrix[speaker], &mut rng);
        t = if model.overlap_prob > 0.0 && next != speaker && rng.random::<f64>() < model.overlap_prob {
            end - rng.random::<f64>() * len / 2.0
        } else {
            end + pause.sample(&mut rng)
        };
        speaker = next;
    }

    let period = cfg.sample_period_ms;
    let steps = duration_ms / period;
    let mut by_speaker: Vec<Vec<&Turn>> = vec![Vec::new(); n];
    for turn in &turns {
        let i = ids.iter().position(|p| p == &turn.participant).expect("known speaker");
        by_speaker[i].push(turn);
    }
    let mut cursor = vec![0usize; n];
    let mut samples = Vec::with_capacity((steps as usize + 1) * n);
    for k in 0..=steps {
        let at = Timestamp(k * period);
        for i in 0..n {
            let own = &by_speaker[i];
            while cursor[i] < own.len() && own[cursor[i]].end <= at {
                cursor[i] += 1;
            }
            let speaking = cursor[i] < own.len() && own[cursor[i]].start <= at;
            let base = if speaking { model.speak_volume } else { model.noise_volume };
            let noise = S::of(rng.random_range(-1.0..=1.0)) * model.jitter;
            let volume = (base + noise).max(S::zero()).min(S::one());
            samples.push(VolumeSample::new(ids[i].clone(), at, volume));
        }
    }
    Generated { samples, truth_turns: turns }
}
