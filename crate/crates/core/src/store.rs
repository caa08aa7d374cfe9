//! Append-only per-session event log.
//!
//! Each session owns `events-<session>.jsonl` in the data directory: one JSON
//! object per line with fields `seq`, `t`, `kind`, `payload`. Session
//! configuration and open/closed status live beside it in
//! `session-<session>.json`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::IntervalStats;
use crate::config::{AnalyticsConfig, SegmenterConfig};
use crate::error::StoreError;
use crate::event::{ParticipantEvent, SpeakingSegment, VolumeSample};
use crate::id::SessionId;
use crate::mediator::MediatorFrame;
use crate::scalar::Scalar;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE", bound = "S: Scalar")]
pub enum EventPayload<S: Scalar = f64> {
    SampleBatch(Vec<VolumeSample<S>>),
    ParticipantEvent(ParticipantEvent),
    Segment(SpeakingSegment),
    Stats(IntervalStats<S>),
    Frame(MediatorFrame<S>),
}

impl<S: Scalar> EventPayload<S> {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::SampleBatch(_) => "SAMPLE_BATCH",
            EventPayload::ParticipantEvent(_) => "PARTICIPANT_EVENT",
            EventPayload::Segment(_) => "SEGMENT",
            EventPayload::Stats(_) => "STATS",
            EventPayload::Frame(_) => "FRAME",
        }
    }
}

/// One log record. `t` is the server receive time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SessionEvent<S: Scalar = f64> {
    pub seq: u64,
    pub t: Timestamp,
    #[serde(flatten)]
    pub payload: EventPayload<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SessionMeta<S: Scalar = f64> {
    pub session: SessionId,
    pub created: Timestamp,
    pub segmenter: SegmenterConfig<S>,
    pub analytics: AnalyticsConfig<S>,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// `fsync` the log after every append.
    #[default]
    Sync,
    /// Flush to the OS only. Survives process crashes, not power loss.
    Flush,
}

/// Where replay stopped early and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corruption {
    pub line: usize,
    pub last_valid_seq: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub events: u64,
    pub corruption: Option<Corruption>,
}

/// Handle on a data directory holding session logs.
#[derive(Debug, Clone)]
pub struct Store<S: Scalar = f64> {
    dir: PathBuf,
    durability: Durability,
    _scalar: PhantomData<S>,
}

fn log_name(id: &SessionId) -> String {
    format!("events-{id}.jsonl")
}

fn meta_name(id: &SessionId) -> String {
    format!("session-{id}.json")
}

impl<S: Scalar> Store<S> {
    pub fn open(dir: impl Into<PathBuf>, durability: Durability) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Store { dir, durability, _scalar: PhantomData })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn log_path(&self, id: &SessionId) -> PathBuf {
        self.dir.join(log_name(id))
    }

    fn meta_path(&self, id: &SessionId) -> PathBuf {
        self.dir.join(meta_name(id))
    }

    fn write_meta(&self, meta: &SessionMeta<S>) -> Result<(), StoreError> {
        let path = self.meta_path(&meta.session);
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, meta)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn read_meta(&self, id: &SessionId) -> Result<SessionMeta<S>, StoreError> {
        let path = self.meta_path(id);
        if !path.exists() {
            return Err(StoreError::UnknownSession(id.clone()));
        }
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    /// Creates an empty, open session log.
    pub fn create(&self, meta: SessionMeta<S>) -> Result<SessionLog<S>, StoreError> {
        if self.meta_path(&meta.session).exists() {
            return Err(StoreError::SessionExists(meta.session));
        }
        self.write_meta(&meta)?;
        let file = OpenOptions::new().create(true).append(true).open(self.log_path(&meta.session))?;
        Ok(SessionLog {
            session: meta.session,
            file,
            durability: self.durability,
            next_seq: 1,
            last_t: Timestamp::ZERO,
            closed: meta.closed,
            _scalar: PhantomData,
        })
    }

    /// Sessions present in the directory, open or closed, sorted by id.
    pub fn sessions(&self) -> Result<Vec<SessionMeta<S>>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            let Some(id) = name.to_str().and_then(|n| n.strip_prefix("session-")?.strip_suffix(".json")) else {
                continue;
            };
            if let Ok(id) = SessionId::new(id) {
                out.push(self.read_meta(&id)?);
            }
        }
        out.sort_by(|a, b| a.session.cmp(&b.session));
        Ok(out)
    }

    /// Delivers every valid event of `session` to `sink` in seq order.
    /// Stops at the first unparseable line or seq gap and reports it.
    pub fn replay(
        &self,
        session: &SessionId,
        sink: impl FnMut(SessionEvent<S>),
    ) -> Result<ReplayOutcome, StoreError> {
        let path = self.log_path(session);
        if !self.meta_path(session).exists() {
            return Err(StoreError::UnknownSession(session.clone()));
        }
        let (outcome, _) = scan_log::<S>(&path, sink)?;
        Ok(outcome)
    }

    /// Reopens an existing session log for appending, delivering its events to
    /// `sink` first. A corrupt tail is moved aside so new appends continue
    /// after the last valid seq.
    pub fn reopen(
        &self,
        session: &SessionId,
        sink: impl FnMut(SessionEvent<S>),
    ) -> Result<(SessionLog<S>, ReplayOutcome), StoreError> {
        let meta = self.read_meta(session)?;
        let path = self.log_path(session);
        let (outcome, scan) = scan_log::<S>(&path, sink)?;
        if outcome.corruption.is_some() {
            let bytes = fs::read(&path)?;
            let aside = path.with_extension(format!("jsonl.corrupt-{}", scan.last_seq));
            fs::write(aside, &bytes[scan.valid_bytes as usize..])?;
            let f = OpenOptions::new().write(true).open(&path)?;
            f.set_len(scan.valid_bytes)?;
            f.sync_all()?;
            tracing::warn!(session = %session, corruption = ?outcome.corruption, "truncated corrupt log tail");
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let log = SessionLog {
            session: session.clone(),
            file,
            durability: self.durability,
            next_seq: scan.last_seq + 1,
            last_t: scan.last_t,
            closed: meta.closed,
            _scalar: PhantomData,
        };
        Ok((log, outcome))
    }

    /// Marks the session closed.
    pub fn close(&self, session: &SessionId) -> Result<(), StoreError> {
        let mut meta = self.read_meta(session)?;
        meta.closed = true;
        self.write_meta(&meta)
    }

    /// Closes the session and moves its files under `archive/`.
    pub fn archive(&self, session: &SessionId) -> Result<PathBuf, StoreError> {
        self.close(session)?;
        let dest = self.dir.join("archive");
        fs::create_dir_all(&dest)?;
        for name in [log_name(session), meta_name(session)] {
            let from = self.dir.join(&name);
            if from.exists() {
                fs::rename(from, dest.join(name))?;
            }
        }
        Ok(dest)
    }
}

struct ScanState {
    valid_bytes: u64,
    last_seq: u64,
    last_t: Timestamp,
}

fn scan_log<S: Scalar>(
    path: &Path,
    mut sink: impl FnMut(SessionEvent<S>),
) -> Result<(ReplayOutcome, ScanState), StoreError> {
    let mut state = ScanState { valid_bytes: 0, last_seq: 0, last_t: Timestamp::ZERO };
    let mut events = 0;
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Ok((ReplayOutcome { events: 0, corruption: None }, state));
        }
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let fail = |reason: String, state: &ScanState| Corruption { line: line_no, last_valid_seq: state.last_seq, reason };
        if buf.last() != Some(&b'\n') {
            let c = fail("partial last line".into(), &state);
            return Ok((ReplayOutcome { events, corruption: Some(c) }, state));
        }
        let ev: SessionEvent<S> = match serde_json::from_slice(&buf) {
            Ok(ev) => ev,
            Err(e) => {
                let c = fail(e.to_string(), &state);
                return Ok((ReplayOutcome { events, corruption: Some(c) }, state));
            }
        };
        if ev.seq != state.last_seq + 1 {
            let c = fail(format!("expected seq {}, found {}", state.last_seq + 1, ev.seq), &state);
            return Ok((ReplayOutcome { events, corruption: Some(c) }, state));
        }
        state.valid_bytes += n as u64;
        state.last_seq = ev.seq;
        state.last_t = ev.t;
        events += 1;
        sink(ev);
    }
    Ok((ReplayOutcome { events, corruption: None }, state))
}

/// Writer side of one session's log. Single owner per session.
#[derive(Debug)]
pub struct SessionLog<S: Scalar = f64> {
    session: SessionId,
    file: File,
    durability: Durability,
    next_seq: u64,
    last_t: Timestamp,
    closed: bool,
    _scalar: PhantomData<S>,
}

impl<S: Scalar> SessionLog<S> {
    pub fn session(&self) -> &SessionId {
        &self.session
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn mark_closed(&mut self) {
        self.closed = true;
    }

    /// Seq the next append will receive.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Appends `payload` stamped at `t` (clamped so `t` never decreases) and
    /// returns its seq once the line is written.
    pub fn append(&mut self, t: Timestamp, payload: EventPayload<S>) -> Result<SessionEvent<S>, StoreError> {
        if self.closed {
            return Err(StoreError::SessionClosed(self.session.clone()));
        }
        let ev = SessionEvent { seq: self.next_seq, t: t.max(self.last_t), payload };
        let mut line = serde_json::to_vec(&ev)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        match self.durability {
            Durability::Sync => self.file.sync_data()?,
            Durability::Flush => self.file.flush()?,
        }
        self.next_seq += 1;
        self.last_t = ev.t;
        Ok(ev)
    }
}

/// Segments ordered by start for windowed intersection queries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SegmentIndex {
    by_start: Vec<SpeakingSegment>,
    max_len: u64,
}

impl SegmentIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.by_start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_start.is_empty()
    }

    pub fn insert(&mut self, seg: SpeakingSegment) {
        self.max_len = self.max_len.max(seg.len_ms());
        let key = (seg.start, &seg.participant);
        let at = self.by_start.partition_point(|s| (s.start, &s.participant) <= key);
        self.by_start.insert(at, seg);
    }

    /// Every segment intersecting `[from, to)`, sorted by start.
    pub fn query(&self, from: Timestamp, to: Timestamp) -> Result<Vec<SpeakingSegment>, StoreError> {
        if from >= to {
            return Err(StoreError::BadRange { from, to });
        }
        let lo = from.saturating_sub_ms(self.max_len);
        let begin = self.by_start.partition_point(|s| s.start < lo);
        let end = self.by_start.partition_point(|s| s.start < to);
        Ok(self.by_start[begin..end].iter().filter(|s| s.end > from).cloned().collect())
    }

    pub fn all(&self) -> &[SpeakingSegment] {
        &self.by_start
    }
}
