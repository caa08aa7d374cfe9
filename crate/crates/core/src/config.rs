use serde::{Deserialize, Serialize};

use crate::error::ConfigViolation;
use crate::scalar::Scalar;

/// Parameters of the volume-threshold speech filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "S: Scalar")]
pub struct SegmenterConfig<S: Scalar = f64> {
    /// Samples at or above this normalized volume count as speech.
    pub volume_threshold: S,
    /// Dips in speech no longer than this are bridged.
    pub merge_gap_ms: u64,
    /// Speech runs shorter than this are discarded.
    pub min_segment_ms: u64,
    /// Nominal spacing of a participant's samples.
    pub sample_period_ms: u64,
}

impl<S: Scalar> Default for SegmenterConfig<S> {
    fn default() -> Self {
        SegmenterConfig {
            volume_threshold: S::of(0.15),
            merge_gap_ms: 300,
            min_segment_ms: 500,
            sample_period_ms: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "S: Scalar")]
pub struct AnalyticsConfig<S: Scalar = f64> {
    pub tick_ms: u64,
    pub window_ms: u64,
    /// Same-speaker segments separated by at most this much form one turn.
    pub turn_merge_gap_ms: u64,
    /// Turn rate at which the mediator ball reaches full intensity.
    pub intensity_saturation_turns_per_min: S,
    /// Weight of the newest ball position in the exponential smoother.
    pub ball_smoothing_alpha: S,
}

impl<S: Scalar> Default for AnalyticsConfig<S> {
    fn default() -> Self {
        AnalyticsConfig {
            tick_ms: 5_000,
            window_ms: 60_000,
            turn_merge_gap_ms: 1_000,
            intensity_saturation_turns_per_min: S::of(20.0),
            ball_smoothing_alpha: S::of(0.3),
        }
    }
}

/// Checks every configuration invariant and reports all violations at once.
pub fn validate_config<S: Scalar>(
    seg: &SegmenterConfig<S>,
    ana: &AnalyticsConfig<S>,
) -> Result<(), Vec<ConfigViolation>> {
    let mut errs = Vec::new();
    let zero = S::zero();
    let one = S::one();

    // NaN fails both comparisons and lands here too.
    if !(seg.volume_threshold > zero && seg.volume_threshold < one) {
        errs.push(ConfigViolation::VolumeThreshold);
    }
    for (name, v) in [
        ("merge_gap_ms", seg.merge_gap_ms),
        ("min_segment_ms", seg.min_segment_ms),
        ("sample_period_ms", seg.sample_period_ms),
        ("tick_ms", ana.tick_ms),
        ("window_ms", ana.window_ms),
        ("turn_merge_gap_ms", ana.turn_merge_gap_ms),
    ] {
        if v == 0 {
            errs.push(ConfigViolation::NotPositive(name));
        }
    }
    if seg.min_segment_ms < seg.sample_period_ms {
        errs.push(ConfigViolation::MinSegmentBelowSamplePeriod);
    }
    if ana.tick_ms > ana.window_ms {
        errs.push(ConfigViolation::TickExceedsWindow);
    }
    if !(ana.intensity_saturation_turns_per_min > zero)
        || !ana.intensity_saturation_turns_per_min.is_finite()
    {
        errs.push(ConfigViolation::NotPositive("intensity_saturation_turns_per_min"));
    }
    if !(ana.ball_smoothing_alpha > zero && ana.ball_smoothing_alpha <= one) {
        errs.push(ConfigViolation::SmoothingAlpha);
    }

    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}
