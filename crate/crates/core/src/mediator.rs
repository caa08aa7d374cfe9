//! Meeting Mediator frames.
//!
//! Participants sit on the unit circle, first joiner at the top, proceeding
//! clockwise. The ball is the turn-share weighted centroid of the nodes,
//! exponentially smoothed across ticks; its intensity is the turn rate
//! relative to a saturation rate; edge weights are speaking-time shares.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analytics::IntervalStats;
use crate::config::AnalyticsConfig;
use crate::error::MediatorError;
use crate::id::{ParticipantId, SessionId};
use crate::scalar::Scalar;
use crate::time::Timestamp;

pub const MAX_PARTICIPANTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Node<S: Scalar = f64> {
    pub participant: ParticipantId,
    pub angle: S,
    pub x: S,
    pub y: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Ball<S: Scalar = f64> {
    pub x: S,
    pub y: S,
    pub intensity: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct MediatorFrame<S: Scalar = f64> {
    pub session: SessionId,
    pub tick: Timestamp,
    pub nodes: Vec<Node<S>>,
    pub ball: Ball<S>,
    pub edges: BTreeMap<ParticipantId, S>,
}

impl<S: Scalar> MediatorFrame<S> {
    fn same_members(&self, participants: &[ParticipantId]) -> bool {
        self.nodes.len() == participants.len()
            && self.nodes.iter().zip(participants).all(|(n, p)| &n.participant == p)
    }
}

/// Places participant `i` of `n` at angle `π/2 − 2πi/n`.
pub fn layout_nodes<S: Scalar>(participants: &[ParticipantId]) -> Result<Vec<Node<S>>, MediatorError> {
    let n = participants.len();
    if n > MAX_PARTICIPANTS {
        return Err(MediatorError::TooManyParticipants(n));
    }
    Ok(participants
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let angle = S::FRAC_PI_2() - S::TAU() * S::of_u64(i as u64) / S::of_u64(n as u64);
            Node { participant: p.clone(), angle, x: angle.cos(), y: angle.sin() }
        })
        .collect())
}

/// Builds the frame for `stats`, smoothing the ball against `prev` when it
/// has the same participants in the same order.
pub fn compute_frame<S: Scalar>(
    stats: &IntervalStats<S>,
    prev: Option<&MediatorFrame<S>>,
    cfg: &AnalyticsConfig<S>,
) -> Result<MediatorFrame<S>, MediatorError> {
    let present = &stats.participants_present;
    let nodes = layout_nodes::<S>(present)?;

    let turn_counts: Vec<u64> = present.iter().map(|p| stats.turns.get(p).copied().unwrap_or(0)).collect();
    let total_turns: u64 = turn_counts.iter().sum();
    let (mut x, mut y) = (S::zero(), S::zero());
    if total_turns > 0 {
        let total = S::of_u64(total_turns);
        for (node, &c) in nodes.iter().zip(&turn_counts) {
            let share = S::of_u64(c) / total;
            x = x + share * node.x;
            y = y + share * node.y;
        }
    }
    if let Some(prev) = prev.filter(|f| f.same_members(present)) {
        let a = cfg.ball_smoothing_alpha;
        x = a * x + (S::one() - a) * prev.ball.x;
        y = a * y + (S::one() - a) * prev.ball.y;
    }

    let intensity = (stats.turn_taking_per_min / cfg.intensity_saturation_turns_per_min)
        .max(S::zero())
        .min(S::one());

    let times: Vec<u64> = present.iter().map(|p| stats.speaking_time_ms.get(p).copied().unwrap_or(0)).collect();
    let total_time: u64 = times.iter().sum();
    let edges = present
        .iter()
        .zip(&times)
        .map(|(p, &ms)| {
            let w = if total_time == 0 { S::zero() } else { S::of_u64(ms) / S::of_u64(total_time) };
            (p.clone(), w)
        })
        .collect();

    Ok(MediatorFrame {
        session: stats.session.clone(),
        tick: stats.tick,
        nodes,
        ball: Ball { x, y, intensity },
        edges,
    })
}
