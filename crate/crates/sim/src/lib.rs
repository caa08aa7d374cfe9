//! Drives a breakout server, or writes files, from a synthetic meeting.

use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use reqwest::{Method, StatusCode};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use breakout_core::{
    generate, ConversationModel, EventPayload, Generated, SegmenterConfig, SessionEvent, SpeakingSegment, Timestamp,
    Turn, VolumeSample,
};

pub const MAX_BATCH: usize = 1000;
pub const CHUNK_MS: u64 = 1000;

#[derive(Debug, Clone)]
pub struct DriveOptions {
    pub server: String,
    pub token: String,
    /// Simulated milliseconds per wall-clock millisecond.
    pub speed: f64,
    /// Extra attempts after a failed HTTP call.
    pub retries: u32,
    /// Flat config overrides sent when the session is created, on top of
    /// the segmenter config used for generation.
    pub overrides: Map<String, Value>,
}

impl DriveOptions {
    pub fn new(server: impl Into<String>, token: impl Into<String>, speed: f64) -> Self {
        DriveOptions { server: server.into(), token: token.into(), speed, retries: 3, overrides: Map::new() }
    }
}

#[derive(Debug, Clone)]
pub struct DriveReport {
    pub session_id: String,
    /// Simulated time zero on the server's clock.
    pub offset_ms: u64,
    pub end: Timestamp,
    /// Shifted onto the server timeline.
    pub truth_turns: Vec<Turn>,
    pub posted: usize,
    pub accepted: usize,
    pub dropped: usize,
    pub wall: Duration,
}

#[derive(Deserialize)]
struct Created {
    session_id: String,
}

#[derive(Deserialize)]
struct Ingested {
    accepted: usize,
    dropped: usize,
}

struct Client {
    http: reqwest::Client,
    base: String,
    token: String,
    retries: u32,
}

impl Client {
    async fn call(&self, method: Method, path: &str, body: Option<&Value>) -> anyhow::Result<(StatusCode, String)> {
        let url = format!("{}{path}", self.base);
        let mut last = None;
        for attempt in 0..=self.retries {
            if attempt > 0 {
                tokio::time::sleep(Duration::from_millis(100 << attempt.min(5))).await;
            }
            let mut req = self.http.request(method.clone(), &url).bearer_auth(&self.token);
            if let Some(b) = body {
                req = req.json(b);
            }
            match req.send().await {
                Ok(resp) if resp.status().is_server_error() => {
                    last = Some(anyhow!("{method} {path}: {}", resp.status()));
                }
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().await.unwrap_or_default();
                    if status.is_client_error() {
                        bail!("{method} {path}: {status}: {text}");
                    }
                    return Ok((status, text));
                }
                Err(e) => last = Some(anyhow!("{method} {path}: {e}")),
            }
            tracing::warn!("attempt {} failed: {}", attempt + 1, last.as_ref().unwrap());
        }
        Err(last.unwrap().context(format!("giving up after {} attempts", self.retries + 1)))
    }
}

/// Splits time-major samples into consecutive chunks of `chunk_ms`
/// simulated time, each at most `MAX_BATCH` samples.
pub fn chunks(samples: &[VolumeSample], chunk_ms: u64) -> Vec<&[VolumeSample]> {
    let mut out = Vec::new();
    let mut rest = samples;
    while let Some(first) = rest.first() {
        let bucket = first.t.0 / chunk_ms;
        let n = rest.iter().take(MAX_BATCH).take_while(|s| s.t.0 / chunk_ms == bucket).count();
        out.push(&rest[..n]);
        rest = &rest[n..];
    }
    out
}

/// Runs one meeting against a live server: create, join, paced ingestion,
/// leave, close.
pub async fn drive(
    model: &ConversationModel,
    duration_ms: u64,
    cfg: &SegmenterConfig,
    opts: &DriveOptions,
) -> anyhow::Result<DriveReport> {
    if let Err(errs) = model.validate(cfg) {
        bail!("invalid model: {}", errs.join("; "));
    }
    if opts.speed.is_nan() || opts.speed <= 0.0 {
        bail!("speed must be positive");
    }
    let client = Client {
        http: reqwest::Client::builder().timeout(Duration::from_secs(30)).build()?,
        base: opts.server.trim_end_matches('/').to_string(),
        token: opts.token.clone(),
        retries: opts.retries,
    };

    let offset_ms = Timestamp::now().0;
    let Generated { samples, truth_turns } = generate(model, duration_ms, cfg).shifted(offset_ms);
    let end = Timestamp(offset_ms + duration_ms);

    let mut config = match serde_json::to_value(cfg)? {
        Value::Object(m) => m,
        _ => unreachable!("config serializes to an object"),
    };
    config.extend(opts.overrides.clone());
    let (_, body) = client.call(Method::POST, "/v1/sessions", Some(&Value::Object(config))).await?;
    let session_id = serde_json::from_str::<Created>(&body).context("create response")?.session_id;
    let base = format!("/v1/sessions/{session_id}");
    tracing::info!(session = %session_id, "created session");

    for p in model.participant_ids() {
        let body = json!({ "participant_id": p, "t": offset_ms });
        client.call(Method::POST, &format!("{base}/participants"), Some(&body)).await?;
    }

    let started = Instant::now();
    let (mut posted, mut accepted, mut dropped) = (0, 0, 0);
    for chunk in chunks(&samples, CHUNK_MS) {
        let last = chunk.last().expect("chunks are non-empty").t.0 - offset_ms;
        // a chunk is sent once its simulated time has passed
        let due = Duration::from_secs_f64(last as f64 / opts.speed / 1000.0);
        if let Some(wait) = due.checked_sub(started.elapsed()) {
            tokio::time::sleep(wait).await;
        }
        let body = json!({ "samples": chunk });
        let (_, resp) = client.call(Method::POST, &format!("{base}/samples"), Some(&body)).await?;
        let r: Ingested = serde_json::from_str(&resp).context("ingest response")?;
        posted += chunk.len();
        accepted += r.accepted;
        dropped += r.dropped;
    }

    for p in model.participant_ids() {
        client.call(Method::DELETE, &format!("{base}/participants/{p}?t={}", end.0), None).await?;
    }
    client.call(Method::POST, &format!("{base}/close"), None).await?;

    Ok(DriveReport { session_id, offset_ms, end, truth_turns, posted, accepted, dropped, wall: started.elapsed() })
}

fn write_jsonl(path: &Path, events: impl Iterator<Item = SessionEvent>) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for ev in events {
        serde_json::to_writer(&mut w, &ev)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes samples as `SAMPLE_BATCH` records, one per chunk.
pub fn write_samples(path: &Path, samples: &[VolumeSample]) -> anyhow::Result<()> {
    let events = chunks(samples, CHUNK_MS).into_iter().enumerate().map(|(i, c)| SessionEvent {
        seq: i as u64,
        t: c.last().expect("chunks are non-empty").t,
        payload: EventPayload::SampleBatch(c.to_vec()),
    });
    write_jsonl(path, events)
}

/// Writes truth turns as `SEGMENT` records.
pub fn write_truth(path: &Path, turns: &[Turn]) -> anyhow::Result<()> {
    let events = turns.iter().enumerate().map(|(i, t)| SessionEvent {
        seq: i as u64,
        t: t.end,
        payload: EventPayload::Segment(SpeakingSegment {
            participant: t.participant.clone(),
            start: t.start,
            end: t.end,
        }),
    });
    write_jsonl(path, events)
}

/// Reads a next-speaker matrix given as a JSON array of rows.
pub fn read_matrix(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
