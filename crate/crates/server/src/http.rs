//! HTTP routes under `/v1`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use breakout_core::{AnalyticsConfig, ParticipantId, SegmenterConfig, Timestamp, VolumeSample};

use crate::error::ApiError;
use crate::state::{AppState, MAX_BATCH};
use crate::ws;

pub type AppRef = Arc<AppState>;

pub fn router(state: AppRef) -> Router {
    Router::new()
        .route("/v1/healthz", get(|| async { "ok" }))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/participants", post(join))
        .route("/v1/sessions/{id}/participants/{pid}", delete(leave))
        .route("/v1/sessions/{id}/samples", post(ingest))
        .route("/v1/sessions/{id}/close", post(close))
        .route("/v1/sessions/{id}/stats", get(stats))
        .route("/v1/sessions/{id}/mediator", get(mediator))
        .route("/v1/sessions/{id}/segments", get(segments))
        .route("/v1/sessions/{id}/stream", get(ws::stream))
        .with_state(state)
}

/// Constant-time comparison of the presented token.
pub fn token_matches(expected: &str, presented: &str) -> bool {
    let (a, b) = (expected.as_bytes(), presented.as_bytes());
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

pub fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ")
}

fn authorize(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    match bearer(headers) {
        Some(t) if token_matches(&state.config.token, t) => Ok(()),
        _ => Err(ApiError::Unauthorized),
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("malformed body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Unavailable(e.to_string()))?
}

fn json_text(text: &str) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text.to_owned()).into_response()
}

const SEGMENTER_KEYS: [&str; 4] = ["volume_threshold", "merge_gap_ms", "min_segment_ms", "sample_period_ms"];
const ANALYTICS_KEYS: [&str; 5] =
    ["tick_ms", "window_ms", "turn_merge_gap_ms", "intensity_saturation_turns_per_min", "ball_smoothing_alpha"];

/// Applies a flat JSON object of overrides on top of the server defaults.
fn merge_overrides(state: &AppState, body: &Bytes) -> Result<(SegmenterConfig, AnalyticsConfig), ApiError> {
    let text = std::str::from_utf8(body).map_err(|_| ApiError::invalid("body is not UTF-8"))?;
    let overrides: serde_json::Map<String, Value> =
        if text.trim().is_empty() { Default::default() } else { parse_body(body)? };
    if let Some(k) = overrides.keys().find(|k| !SEGMENTER_KEYS.contains(&k.as_str()) && !ANALYTICS_KEYS.contains(&k.as_str())) {
        return Err(ApiError::invalid(format!("unknown config field {k:?}")));
    }
    let pick = |defaults: Value, keys: &[&str]| -> Value {
        let mut obj = defaults.as_object().cloned().unwrap_or_default();
        for (k, v) in &overrides {
            if keys.contains(&k.as_str()) {
                obj.insert(k.clone(), v.clone());
            }
        }
        Value::Object(obj)
    };
    let seg_json = pick(serde_json::to_value(state.config.segmenter).expect("config serializes"), &SEGMENTER_KEYS);
    let ana_json = pick(serde_json::to_value(state.config.analytics).expect("config serializes"), &ANALYTICS_KEYS);
    let seg = serde_json::from_value(seg_json).map_err(|e| ApiError::invalid(e.to_string()))?;
    let ana = serde_json::from_value(ana_json).map_err(|e| ApiError::invalid(e.to_string()))?;
    Ok((seg, ana))
}

#[derive(Serialize)]
struct Created {
    session_id: String,
}

async fn create_session(State(state): State<AppRef>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    authorize(&state, &headers)?;
    let (seg, ana) = merge_overrides(&state, &body)?;
    let id = blocking(move || state.create_session(seg, ana)).await?;
    Ok((StatusCode::CREATED, Json(Created { session_id: id.to_string() })).into_response())
}

#[derive(Deserialize)]
struct JoinBody {
    participant_id: ParticipantId,
    #[serde(default)]
    t: Option<Timestamp>,
}

async fn join(
    State(state): State<AppRef>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<StatusCode, ApiError> {
    authorize(&state, &headers)?;
    let handle = state.session(&id)?;
    let body: JoinBody = parse_body(&body)?;
    blocking(move || Ok(handle.join(body.participant_id, body.t)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct LeaveQuery {
    t: Option<u64>,
}

async fn leave(
    State(state): State<AppRef>,
    Path((id, pid)): Path<(String, String)>,
    Query(q): Query<LeaveQuery>,
    headers: HeaderMap,
) -> Result<StatusCode, ApiError> {
    authorize(&state, &headers)?;
    let handle = state.session(&id)?;
    let pid = ParticipantId::new(pid).map_err(|e| ApiError::invalid(e.to_string()))?;
    blocking(move || Ok(handle.leave(&pid, q.t.map(Timestamp))?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct SampleBatch {
    samples: Vec<VolumeSample>,
}

#[derive(Serialize)]
struct Ingested {
    accepted: usize,
    dropped: usize,
}

async fn ingest(
    State(state): State<AppRef>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Ingested>, ApiError> {
    authorize(&state, &headers)?;
    let handle = state.session(&id)?;
    let batch: SampleBatch = parse_body(&body)?;
    if batch.samples.len() > MAX_BATCH {
        return Err(ApiError::invalid(format!("batch of {} exceeds {MAX_BATCH} samples", batch.samples.len())));
    }
    let out = blocking(move || Ok(handle.ingest(batch.samples)?)).await?;
    Ok(Json(Ingested { accepted: out.accepted, dropped: out.dropped }))
}

async fn close(State(state): State<AppRef>, Path(id): Path<String>, headers: HeaderMap) -> Result<StatusCode, ApiError> {
    authorize(&state, &headers)?;
    let handle = state.session(&id)?;
    let st = state.clone();
    blocking(move || {
        let now = handle.with_session(|s| s.clock()).max(Timestamp::now());
        Ok(handle.close(st.store(), now)?)
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn stats(State(state): State<AppRef>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    authorize(&state, &headers)?;
    Ok(json_text(state.session(&id)?.stats_envelope().payload_json()))
}

async fn mediator(State(state): State<AppRef>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    authorize(&state, &headers)?;
    Ok(json_text(state.session(&id)?.frame_envelope().payload_json()))
}

async fn segments(
    State(state): State<AppRef>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    authorize(&state, &headers)?;
    let handle = state.session(&id)?;
    let bound = |k: &str| -> Result<Timestamp, ApiError> {
        q.get(k)
            .ok_or_else(|| ApiError::invalid(format!("missing query parameter {k:?}")))?
            .parse()
            .map(Timestamp)
            .map_err(|_| ApiError::invalid(format!("{k:?} must be integer milliseconds")))
    };
    let (from, to) = (bound("from")?, bound("to")?);
    Ok(Json(handle.query_segments(from, to)?).into_response())
}
