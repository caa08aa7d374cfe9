#![allow(dead_code)]

use std::path::Path;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::client::IntoClientRequest;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use breakout_core::Durability;
use breakout_server::{serve, Running, ServerConfig};

pub const TOKEN: &str = "test-token";

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub fn config(dir: &Path) -> ServerConfig {
    let mut c = ServerConfig::new(TOKEN, dir);
    c.durability = Durability::Flush;
    c
}

pub async fn start(config: ServerConfig, tick: Option<Duration>) -> Running {
    serve(config, "127.0.0.1:0", tick).await.expect("server starts")
}

pub fn client() -> reqwest::Client {
    reqwest::Client::new()
}

pub async fn create_session(url: &str, body: &str) -> String {
    let resp = client()
        .post(format!("{url}/v1/sessions"))
        .bearer_auth(TOKEN)
        .body(body.to_string())
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 201);
    resp.json::<Value>().await.unwrap()["session_id"].as_str().unwrap().to_string()
}

pub async fn get_text(url: &str) -> (u16, String) {
    let resp = client().get(url).bearer_auth(TOKEN).send().await.unwrap();
    (resp.status().as_u16(), resp.text().await.unwrap())
}

pub async fn ws_connect(base: &str, session: &str, token: Option<&str>) -> Ws {
    let mut url = format!("{}/v1/sessions/{session}/stream", base.replacen("http", "ws", 1));
    if let Some(t) = token {
        url.push_str(&format!("?token={t}"));
    }
    let mut req = url.into_client_request().unwrap();
    req.headers_mut().insert("Sec-WebSocket-Protocol", "breakout.v1".parse().unwrap());
    let (ws, resp) = connect_async(req).await.expect("websocket handshake");
    assert_eq!(resp.headers().get("sec-websocket-protocol").unwrap(), "breakout.v1");
    ws
}

/// Next text frame as JSON, or `Err(close code)` when the server closes.
pub async fn next_envelope(ws: &mut Ws) -> Result<Value, u16> {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(20), ws.next()).await.expect("websocket timed out");
        match msg {
            Some(Ok(Message::Text(t))) => return Ok(serde_json::from_str(t.as_str()).unwrap()),
            Some(Ok(Message::Close(frame))) => return Err(frame.map(|f| u16::from(f.code)).unwrap_or(1005)),
            Some(Ok(Message::Ping(p))) => {
                let _ = ws.send(Message::Pong(p)).await;
            }
            Some(Ok(_)) => {}
            None | Some(Err(_)) => return Err(1006),
        }
    }
}

/// Sorts object keys recursively and prints compactly.
pub fn canonical(text: &str) -> String {
    fn sort(v: Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut entries: Vec<_> = m.into_iter().collect();
                entries.sort_by(|a, b| a.0.cmp(&b.0));
                Value::Object(entries.into_iter().map(|(k, v)| (k, sort(v))).collect())
            }
            Value::Array(a) => Value::Array(a.into_iter().map(sort).collect()),
            other => other,
        }
    }
    sort(serde_json::from_str(text).unwrap()).to_string()
}
