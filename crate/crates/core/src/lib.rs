//! Core of the breakout meeting-analytics service: speech segmentation from
//! volume streams, windowed group-dynamics statistics, Meeting Mediator
//! frames, the append-only session log and a synthetic meeting generator.
//!
//! Real-valued quantities are generic over [`Scalar`] (`f32` or `f64`); the
//! generic types default to `f64` and `f32` aliases are provided below.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod engine;
pub mod error;
pub mod event;
pub mod id;
pub mod mediator;
pub mod scalar;
pub mod segmenter;
pub mod simulator;
pub mod store;
pub mod time;

pub use analytics::{
    compute_interval_stats, derive_turns, participants_present, tick_all, transition_matrix, IntervalStats,
    SessionSnapshot, TickReport, TransitionMatrix, Turn,
};
pub use config::{validate_config, AnalyticsConfig, SegmenterConfig};
pub use engine::{IngestOutcome, Session, TickOutput};
pub use error::{ConfigViolation, IdError, MediatorError, SampleError, SessionError, StoreError};
pub use event::{ParticipantEvent, ParticipantEventKind, SpeakingSegment, VolumeSample};
pub use id::{ParticipantId, SessionId};
pub use mediator::{compute_frame, layout_nodes, Ball, MediatorFrame, Node, MAX_PARTICIPANTS};
pub use scalar::Scalar;
pub use segmenter::{overlap_intervals, SegmenterState};
pub use simulator::{generate, ConversationModel, Generated};
pub use store::{Durability, EventPayload, ReplayOutcome, SegmentIndex, SessionEvent, SessionLog, SessionMeta, Store};
pub use time::{Timestamp, Window};

/// Default real type of the service.
pub type Real = f64;

pub type VolumeSampleF32 = VolumeSample<f32>;
pub type SegmenterConfigF32 = SegmenterConfig<f32>;
pub type AnalyticsConfigF32 = AnalyticsConfig<f32>;
pub type IntervalStatsF32 = IntervalStats<f32>;
pub type TransitionMatrixF32 = TransitionMatrix<f32>;
pub type MediatorFrameF32 = MediatorFrame<f32>;
pub type SessionEventF32 = SessionEvent<f32>;
pub type SessionF32 = Session<f32>;
pub type StoreF32 = Store<f32>;
pub type ConversationModelF32 = ConversationModel<f32>;
