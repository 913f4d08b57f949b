#![allow(dead_code)]

use std::net::SocketAddr;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use perfcity::harness::{replay, ReplayReport, TraceFile};
use perfcity::ingest::MetricFrame;
use perfcity::service::{run_server, ClientRequest, ServerConfig, ServerHandle, ServerMessage};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub fn local() -> SocketAddr {
    ([127, 0, 0, 1], 0).into()
}

pub fn config(window_ms: u64, history: usize) -> ServerConfig {
    ServerConfig {
        ingest_address: local(),
        client_address: local(),
        window_ms,
        history_capacity: history,
        ..Default::default()
    }
}

pub async fn start(cfg: ServerConfig) -> ServerHandle {
    run_server(cfg).await.expect("server starts")
}

/// Headless client on the WebSocket channel.
pub struct TestClient {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl TestClient {
    pub async fn connect(server: &ServerHandle) -> Self {
        let (ws, _) = tokio_tungstenite::connect_async(server.client_url()).await.expect("ws connect");
        Self { ws }
    }

    pub async fn send(&mut self, req: &ClientRequest) {
        self.ws.send(Message::Text(req.to_line().into())).await.expect("ws send");
    }

    /// Next server message, or `None` on close/timeout.
    pub async fn recv_timeout(&mut self, timeout: Duration) -> Option<ServerMessage> {
        loop {
            let msg = tokio::time::timeout(timeout, self.ws.next()).await.ok()??.ok()?;
            match msg {
                Message::Text(t) => {
                    return Some(serde_json::from_str(&t).expect("server sends valid messages"))
                }
                Message::Close(_) => return None,
                _ => continue,
            }
        }
    }

    pub async fn recv(&mut self) -> ServerMessage {
        self.recv_timeout(Duration::from_secs(10)).await.expect("message before timeout")
    }

    /// Reads through the subscription bundle up to the `live` marker.
    pub async fn bundle(&mut self) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        loop {
            let m = self.recv().await;
            let done = matches!(m, ServerMessage::Live { .. });
            out.push(m);
            if done {
                return out;
            }
        }
    }

    /// Next non-frame message (frames in between are skipped).
    pub async fn recv_reply(&mut self) -> ServerMessage {
        loop {
            match self.recv().await {
                ServerMessage::Frame(_) => continue,
                other => return other,
            }
        }
    }

    pub async fn request(&mut self, req: &ClientRequest) -> ServerMessage {
        self.send(req).await;
        self.recv_reply().await
    }
}

pub fn frames(msgs: &[ServerMessage]) -> Vec<MetricFrame> {
    msgs.iter()
        .filter_map(|m| match m {
            ServerMessage::Frame(f) => Some(f.clone()),
            _ => None,
        })
        .collect()
}

pub async fn replay_async(trace: TraceFile, target: SocketAddr, speed: f64) -> ReplayReport {
    tokio::task::spawn_blocking(move || replay(&trace, &target.to_string(), speed))
        .await
        .unwrap()
        .expect("replay succeeds")
}

/// Polls server status until `done` holds or the timeout passes.
pub async fn wait_for<F>(server: &ServerHandle, timeout: Duration, mut done: F) -> bool
where
    F: FnMut(&perfcity::service::Status) -> bool,
{
    let deadline = tokio::time::Instant::now() + timeout;
    loop {
        let status = server.status().await.unwrap();
        if done(&status) {
            return true;
        }
        if tokio::time::Instant::now() > deadline {
            return false;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}
