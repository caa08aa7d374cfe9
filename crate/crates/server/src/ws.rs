//! Websocket push of stream envelopes.

use std::collections::HashMap;
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::HeaderMap;
use axum::response::Response;

use crate::http::{bearer, token_matches, AppRef};
use crate::state::Subscription;

pub const SUBPROTOCOL: &str = "breakout.v1";
pub const CLOSE_POLICY: u16 = 1008;
pub const CLOSE_NOT_FOUND: u16 = 4404;

const SEND_TIMEOUT: Duration = Duration::from_secs(10);

pub async fn stream(
    State(state): State<AppRef>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    headers: HeaderMap,
    ws: WebSocketUpgrade,
) -> Response {
    let presented = bearer(&headers).or(q.get("token").map(String::as_str));
    let authorized = presented.is_some_and(|t| token_matches(&state.config.token, t));
    let buffer = state.config.subscriber_buffer;
    let session = state.session(&id).ok();
    ws.protocols([SUBPROTOCOL]).on_upgrade(move |socket| async move {
        if !authorized {
            return close(socket, CLOSE_POLICY, "missing or invalid token").await;
        }
        let Some(handle) = session else {
            return close(socket, CLOSE_NOT_FOUND, "session not found").await;
        };
        let sub = handle.subscribe(buffer);
        pump(socket, sub).await;
    })
}

async fn close(mut socket: WebSocket, code: u16, reason: &'static str) {
    let frame = CloseFrame { code, reason: reason.into() };
    let _ = tokio::time::timeout(SEND_TIMEOUT, socket.send(Message::Close(Some(frame)))).await;
}

async fn pump(mut socket: WebSocket, sub: Subscription) {
    let Subscription { initial, mut rx, mut kill } = sub;
    for env in initial {
        if socket.send(Message::Text(env.text.clone().into())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            biased;
            reason = &mut kill => {
                if let Ok(reason) = reason {
                    tracing::warn!("disconnecting subscriber: {reason}");
                    close(socket, CLOSE_POLICY, reason).await;
                }
                return;
            }
            env = rx.recv() => {
                let Some(env) = env else { return };
                // a peer that stops reading can block the write; the kill
                // signal must still win
                tokio::select! {
                    sent = socket.send(Message::Text(env.text.clone().into())) => {
                        if sent.is_err() {
                            return;
                        }
                    }
                    reason = &mut kill => {
                        if let Ok(reason) = reason {
                            tracing::warn!("disconnecting subscriber: {reason}");
                        }
                        return;
                    }
                }
            }
            msg = socket.recv() => match msg {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
