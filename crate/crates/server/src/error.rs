use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

use breakout_core::{SessionError, StoreError};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("{0}")]
    NotFound(&'static str),
    #[error("{0}")]
    Conflict(String),
    #[error("invalid request")]
    Invalid(Vec<String>),
    #[error("storage unavailable: {0}")]
    Unavailable(String),
}

impl ApiError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ApiError::Invalid(vec![msg.into()])
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSession(_) => ApiError::NotFound("unknown session"),
            StoreError::SessionClosed(_) => ApiError::Conflict(e.to_string()),
            StoreError::BadRange { .. } => ApiError::invalid(e.to_string()),
            StoreError::SessionExists(_) => ApiError::Conflict(e.to_string()),
            StoreError::Io(_) | StoreError::Json(_) => ApiError::Unavailable(e.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::AlreadyJoined(_) | SessionError::NotJoined(_) => ApiError::Conflict(e.to_string()),
            SessionError::Full(_) => ApiError::invalid(e.to_string()),
            SessionError::Tick(_) => ApiError::Unavailable(e.to_string()),
            SessionError::Store(s) => s.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = match &self {
            ApiError::Invalid(details) => json!({ "error": "invalid request", "details": details }),
            other => json!({ "error": other.to_string() }),
        };
        (self.status(), Json(body)).into_response()
    }
}
