use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Mutex, RwLock};
use tokio::sync::{mpsc, oneshot};

use breakout_core::{
    tick_all, validate_config, AnalyticsConfig, Durability, IngestOutcome, IntervalStats, MediatorFrame, ParticipantId,
    SegmenterConfig, Session, SessionError, SessionEvent, SessionId, SessionMeta, SpeakingSegment, Store, StoreError,
    Timestamp, VolumeSample,
};

use crate::envelope::Envelope;
use crate::error::ApiError;

pub const MAX_BATCH: usize = 1000;
pub const DEFAULT_SUBSCRIBER_BUFFER: usize = 1024;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub token: String,
    pub data_dir: PathBuf,
    pub durability: Durability,
    pub segmenter: SegmenterConfig,
    pub analytics: AnalyticsConfig,
    /// Envelopes queued per websocket subscriber before it is disconnected.
    pub subscriber_buffer: usize,
}

impl ServerConfig {
    pub fn new(token: impl Into<String>, data_dir: impl Into<PathBuf>) -> Self {
        ServerConfig {
            token: token.into(),
            data_dir: data_dir.into(),
            durability: Durability::Sync,
            segmenter: SegmenterConfig::default(),
            analytics: AnalyticsConfig::default(),
            subscriber_buffer: DEFAULT_SUBSCRIBER_BUFFER,
        }
    }
}

/// A websocket subscriber's queue plus the signal used to cut it off.
struct Subscriber {
    tx: mpsc::Sender<Arc<Envelope>>,
    kill: Option<oneshot::Sender<&'static str>>,
}

/// Receiving half handed to the websocket task.
pub struct Subscription {
    pub initial: Vec<Arc<Envelope>>,
    pub rx: mpsc::Receiver<Arc<Envelope>>,
    pub kill: oneshot::Receiver<&'static str>,
}

struct Core {
    session: Session,
    subscribers: Vec<Subscriber>,
    last_tick: Option<Instant>,
}

impl Core {
    fn fan_out(&mut self, env: Arc<Envelope>) {
        self.subscribers.retain_mut(|sub| match sub.tx.try_send(env.clone()) {
            Ok(()) => true,
            Err(mpsc::error::TrySendError::Full(_)) => {
                if let Some(kill) = sub.kill.take() {
                    let _ = kill.send("subscriber buffer overflow");
                }
                false
            }
            Err(mpsc::error::TrySendError::Closed(_)) => false,
        });
    }

    fn publish(&mut self, latest: &RwLock<Latest>, events: &[SessionEvent]) {
        let id = self.session.id().clone();
        for ev in events {
            if let Some(env) = Envelope::from_event(&id, ev) {
                let env = Arc::new(env);
                {
                    let mut l = latest.write();
                    match env.kind {
                        crate::envelope::EnvelopeKind::Stats => l.stats = Some(env.clone()),
                        crate::envelope::EnvelopeKind::Frame => l.frame = Some(env.clone()),
                        crate::envelope::EnvelopeKind::ParticipantEvent => {}
                    }
                }
                self.fan_out(env);
            }
        }
    }
}

#[derive(Default)]
struct Latest {
    stats: Option<Arc<Envelope>>,
    frame: Option<Arc<Envelope>>,
}

/// One session's serialized owner plus read-side snapshots.
pub struct SessionHandle {
    id: SessionId,
    core: Mutex<Core>,
    latest: RwLock<Latest>,
}

impl SessionHandle {
    fn new(session: Session) -> Self {
        let latest = Latest {
            stats: session.latest_stats().map(|(seq, s)| Arc::new(Envelope::stats(session.id(), seq, s))),
            frame: session.latest_frame().map(|(seq, f)| Arc::new(Envelope::frame(session.id(), seq, f))),
        };
        SessionHandle {
            id: session.id().clone(),
            core: Mutex::new(Core { session, subscribers: Vec::new(), last_tick: None }),
            latest: RwLock::new(latest),
        }
    }

    pub fn id(&self) -> &SessionId {
        &self.id
    }

    /// Latest stats envelope; before the first tick a zeroed one with seq 0.
    pub fn stats_envelope(&self) -> Arc<Envelope> {
        if let Some(env) = self.latest.read().stats.clone() {
            return env;
        }
        let core = self.core.lock();
        Arc::new(Envelope::stats(&self.id, 0, &core.session.initial_stats()))
    }

    pub fn frame_envelope(&self) -> Arc<Envelope> {
        if let Some(env) = self.latest.read().frame.clone() {
            return env;
        }
        let core = self.core.lock();
        Arc::new(Envelope::frame(&self.id, 0, &core.session.initial_frame()))
    }

    pub fn with_session<R>(&self, f: impl FnOnce(&Session) -> R) -> R {
        f(&self.core.lock().session)
    }

    pub fn query_segments(&self, from: Timestamp, to: Timestamp) -> Result<Vec<SpeakingSegment>, StoreError> {
        self.core.lock().session.query_segments(from, to)
    }

    /// Registers a subscriber and returns the snapshot it starts from. Done
    /// under the session lock, so nothing published afterwards is missed.
    pub fn subscribe(&self, buffer: usize) -> Subscription {
        let mut core = self.core.lock();
        let initial = {
            let l = self.latest.read();
            let stats = l.stats.clone().unwrap_or_else(|| Arc::new(Envelope::stats(&self.id, 0, &core.session.initial_stats())));
            let frame = l.frame.clone().unwrap_or_else(|| Arc::new(Envelope::frame(&self.id, 0, &core.session.initial_frame())));
            vec![stats, frame]
        };
        let (tx, rx) = mpsc::channel(buffer.max(1));
        let (kill_tx, kill) = oneshot::channel();
        core.subscribers.push(Subscriber { tx, kill: Some(kill_tx) });
        Subscription { initial, rx, kill }
    }

    pub fn subscriber_count(&self) -> usize {
        self.core.lock().subscribers.len()
    }

    pub fn join(&self, participant: ParticipantId, t: Option<Timestamp>) -> Result<(), SessionError> {
        let mut core = self.core.lock();
        let ev = core.session.join(participant, t, Timestamp::now())?;
        core.publish(&self.latest, std::slice::from_ref(&ev));
        Ok(())
    }

    pub fn leave(&self, participant: &ParticipantId, t: Option<Timestamp>) -> Result<(), SessionError> {
        let mut core = self.core.lock();
        let evs = core.session.leave(participant, t, Timestamp::now())?;
        core.publish(&self.latest, &evs);
        Ok(())
    }

    pub fn ingest(&self, samples: Vec<VolumeSample>) -> Result<IngestOutcome, SessionError> {
        let mut core = self.core.lock();
        core.session.ingest(samples, Timestamp::now())
    }

    /// Runs a final tick at `now`, then flushes and closes the session.
    pub fn close(&self, store: &Store, now: Timestamp) -> Result<(), SessionError> {
        let mut core = self.core.lock();
        let snap = core.session.snapshot(now);
        let stats = snap.compute(now).map_err(SessionError::Tick)?;
        let out = core.session.publish_stats(stats, Timestamp::now())?;
        core.publish(&self.latest, &[out.stats, out.frame]);
        core.session.close(store, Timestamp::now())?;
        Ok(())
    }

    /// Computes, persists and publishes one tick ending at `now`, returning
    /// how long the statistics computation took.
    pub fn tick_at(&self, now: Timestamp) -> Result<Duration, SessionError> {
        let snap = self.core.lock().session.snapshot(now);
        let started = Instant::now();
        let mut report = tick_all(std::slice::from_ref(&snap), now);
        let elapsed = started.elapsed();
        let Some(stats) = report.stats.pop() else {
            let msg = report.failures.pop().map(|(_, m)| m).unwrap_or_default();
            return Err(SessionError::Tick(msg));
        };
        self.publish_stats(stats)?;
        Ok(elapsed)
    }

    fn publish_stats(&self, stats: IntervalStats) -> Result<(), SessionError> {
        let mut core = self.core.lock();
        let out = core.session.publish_stats(stats, Timestamp::now())?;
        core.publish(&self.latest, &[out.stats, out.frame]);
        core.last_tick = Some(Instant::now());
        Ok(())
    }

    pub fn latest_frame(&self) -> Option<MediatorFrame> {
        self.core.lock().session.latest_frame().map(|(_, f)| f.clone())
    }

    fn tick_due(&self, period: Duration, now: Instant) -> Option<Timestamp> {
        let core = self.core.lock();
        if core.session.is_closed() {
            return None;
        }
        let every = Duration::from_millis(core.session.meta().analytics.tick_ms).max(period);
        let due = core.last_tick.is_none_or(|t| now.duration_since(t) + period / 2 >= every);
        due.then(|| core.session.clock().max(Timestamp::now()))
    }
}

#[derive(Debug, Default, Clone)]
pub struct TickSummary {
    pub computed: Vec<(SessionId, Duration)>,
    pub failures: Vec<(SessionId, String)>,
}

/// Shared service state.
pub struct AppState {
    pub config: ServerConfig,
    store: Store,
    sessions: RwLock<HashMap<SessionId, Arc<SessionHandle>>>,
    tick_failures: AtomicU64,
}

impl AppState {
    /// Opens the data directory and restores every session found in it.
    pub fn open(config: ServerConfig) -> Result<Arc<Self>, StoreError> {
        let store = Store::open(&config.data_dir, config.durability)?;
        let mut sessions = HashMap::new();
        for meta in store.sessions()? {
            let (session, outcome) = Session::restore(&store, &meta.session)?;
            if let Some(c) = &outcome.corruption {
                tracing::warn!(session = %meta.session, line = c.line, "log corruption: {}", c.reason);
            }
            tracing::info!(session = %meta.session, events = outcome.events, "restored session");
            sessions.insert(meta.session.clone(), Arc::new(SessionHandle::new(session)));
        }
        Ok(Arc::new(AppState { config, store, sessions: RwLock::new(sessions), tick_failures: AtomicU64::new(0) }))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn tick_failures(&self) -> u64 {
        self.tick_failures.load(Ordering::Relaxed)
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions.read().get(id).cloned().ok_or(ApiError::NotFound("unknown session"))
    }

    pub fn sessions(&self) -> Vec<Arc<SessionHandle>> {
        let mut v: Vec<_> = self.sessions.read().values().cloned().collect();
        v.sort_by(|a, b| a.id().cmp(b.id()));
        v
    }

    pub fn create_session(&self, segmenter: SegmenterConfig, analytics: AnalyticsConfig) -> Result<SessionId, ApiError> {
        validate_config(&segmenter, &analytics)
            .map_err(|errs| ApiError::Invalid(errs.iter().map(|e| e.to_string()).collect()))?;
        let id = SessionId::new(uuid::Uuid::new_v4().simple().to_string()).expect("uuid is URL-safe");
        let meta = SessionMeta { session: id.clone(), created: Timestamp::now(), segmenter, analytics, closed: false };
        let session = Session::create(&self.store, meta)?;
        self.sessions.write().insert(id.clone(), Arc::new(SessionHandle::new(session)));
        Ok(id)
    }

    /// Ticks every open session whose tick period has elapsed.
    pub fn tick_due(&self, period: Duration) -> TickSummary {
        let now = Instant::now();
        let mut summary = TickSummary::default();
        for handle in self.sessions() {
            let Some(at) = handle.tick_due(period, now) else { continue };
            match handle.tick_at(at) {
                Ok(d) => summary.computed.push((handle.id().clone(), d)),
                Err(e) => {
                    self.tick_failures.fetch_add(1, Ordering::Relaxed);
                    tracing::error!(session = %handle.id(), "tick failed: {e}");
                    summary.failures.push((handle.id().clone(), e.to_string()));
                }
            }
        }
        summary
    }
}

/// Ticks sessions on a fixed period until the task is dropped.
pub async fn run_scheduler(state: Arc<AppState>, period: Duration) {
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        interval.tick().await;
        let st = state.clone();
        if let Err(e) = tokio::task::spawn_blocking(move || st.tick_due(period)).await {
            tracing::error!("tick task panicked: {e}");
        }
    }
}
