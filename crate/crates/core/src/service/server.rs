use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tracing::{debug, info, warn};

use super::hub::{Command, Hub, Outbound, SceneState, Status};
use super::protocol::{ClientRequest, ServerMessage};
use super::session::Session;
use super::{ServerConfig, ServiceError};
use crate::ingest::{decode_record, MetricFrame, WireRecord};
use crate::model::{ModelError, ModelRecord};

const COMMAND_QUEUE: usize = 65_536;

/// Running server. Dropping the handle leaves the server running until the
/// runtime stops; call [`ServerHandle::shutdown`] for a clean stop.
pub struct ServerHandle {
    ingest_addr: SocketAddr,
    client_addr: SocketAddr,
    commands: mpsc::Sender<Command>,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
    hub: JoinHandle<()>,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::Sender<Command>,
    history_capacity: usize,
    sessions: Arc<AtomicU64>,
}

/// Binds both listeners, then starts the hub, the ingest acceptor, and the
/// client WebSocket endpoint (`/ws`). Fails before accepting anything if
/// either address cannot be bound.
pub async fn run_server(cfg: ServerConfig) -> Result<ServerHandle, ServiceError> {
    cfg.validate()?;
    let bind = |addr: SocketAddr| async move {
        TcpListener::bind(addr).await.map_err(|source| ServiceError::BindFailure { addr, source })
    };
    let ingest = bind(cfg.ingest_address).await?;
    let clients = bind(cfg.client_address).await?;
    let ingest_addr = ingest.local_addr().map_err(|source| ServiceError::BindFailure {
        addr: cfg.ingest_address,
        source,
    })?;
    let client_addr = clients.local_addr().map_err(|source| ServiceError::BindFailure {
        addr: cfg.client_address,
        source,
    })?;

    let (commands, rx) = mpsc::channel(COMMAND_QUEUE);
    let (stop, stop_rx) = watch::channel(false);
    let history_capacity = cfg.history_capacity;
    let hub = tokio::spawn(Hub::new(cfg).run(rx));

    let ingest_task = tokio::spawn(accept_ingest(ingest, commands.clone(), stop_rx.clone()));

    let app = Router::new().route("/ws", get(upgrade)).with_state(AppState {
        commands: commands.clone(),
        history_capacity,
        sessions: Arc::new(AtomicU64::new(0)),
    });
    let mut client_stop = stop_rx;
    let client_task = tokio::spawn(async move {
        let shutdown = async move {
            let _ = client_stop.wait_for(|s| *s).await;
        };
        if let Err(e) = axum::serve(clients, app).with_graceful_shutdown(shutdown).await {
            warn!(error = %e, "client endpoint failed");
        }
    });

    info!(%ingest_addr, %client_addr, "perfcity server listening");
    Ok(ServerHandle {
        ingest_addr,
        client_addr,
        commands,
        stop,
        tasks: vec![ingest_task, client_task],
        hub,
    })
}

impl ServerHandle {
    pub fn ingest_addr(&self) -> SocketAddr {
        self.ingest_addr
    }

    pub fn client_addr(&self) -> SocketAddr {
        self.client_addr
    }

    /// WebSocket URL of the client channel.
    pub fn client_url(&self) -> String {
        format!("ws://{}/ws", self.client_addr)
    }

    pub async fn status(&self) -> Result<Status, ServiceError> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(Command::Status(tx)).await.map_err(|_| ServiceError::Stopped)?;
        rx.await.map_err(|_| ServiceError::Stopped)
    }

    /// Installs a model as if it had arrived over ingest; returns the new revision.
    pub async fn load_model(&self, record: ModelRecord) -> Result<Result<u64, ModelError>, ServiceError> {
        let (tx, rx) = oneshot::channel();
        self.commands
            .send(Command::Model { conn: 0, record, reply: Some(tx) })
            .await
            .map_err(|_| ServiceError::Stopped)?;
        rx.await.map_err(|_| ServiceError::Stopped)
    }

    /// Flushes the open window as a final frame, delivers it to connected
    /// clients, and stops all listeners. Returns the flushed frame, if any
    /// events were ever received.
    pub async fn shutdown(self) -> Option<MetricFrame> {
        let (tx, rx) = oneshot::channel();
        let last = if self.commands.send(Command::Shutdown(tx)).await.is_ok() {
            rx.await.ok().flatten()
        } else {
            None
        };
        let _ = self.hub.await;
        let _ = self.stop.send(true);
        for task in self.tasks {
            let _ = task.await;
        }
        last
    }
}

async fn accept_ingest(
    listener: TcpListener,
    commands: mpsc::Sender<Command>,
    mut stop: watch::Receiver<bool>,
) {
    let mut next_conn = 1u64;
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    let conn = next_conn;
                    next_conn += 1;
                    debug!(conn, %peer, "ingest connection");
                    tokio::spawn(ingest_connection(conn, stream, commands.clone()));
                }
                Err(e) => warn!(error = %e, "ingest accept failed"),
            },
            _ = stop.wait_for(|s| *s) => break,
        }
    }
}

async fn ingest_connection(conn: u64, stream: TcpStream, commands: mpsc::Sender<Command>) {
    let mut lines = BufReader::new(stream).lines();
    let mut bad = 0u64;
    loop {
        let line = match lines.next_line().await {
            Ok(Some(line)) => line,
            Ok(None) => break,
            Err(e) => {
                warn!(conn, error = %e, "ingest read failed");
                break;
            }
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cmd = match decode_record(line) {
            Ok(WireRecord::Model(record)) => Command::Model { conn, record, reply: None },
            Ok(WireRecord::Event(event)) => Command::Event { conn, event },
            Ok(other) => {
                debug!(conn, ?other, "ignoring non-ingest record");
                continue;
            }
            Err(e) => {
                bad += 1;
                debug!(conn, error = %e, "undecodable ingest line");
                continue;
            }
        };
        if commands.send(cmd).await.is_err() {
            break;
        }
    }
    if bad > 0 {
        warn!(conn, bad, "ingest connection sent undecodable lines");
    }
    let _ = commands.send(Command::Disconnect { conn }).await;
}

async fn upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client_session(socket, app))
}

fn scene_messages(state: &SceneState) -> [ServerMessage; 2] {
    [
        ServerMessage::Scene(state.scene.clone()),
        ServerMessage::Order { model_revision: state.model.revision(), classes: state.order.clone() },
    ]
}

async fn client_session(socket: WebSocket, app: AppState) {
    let id = app.sessions.fetch_add(1, Ordering::Relaxed) + 1;
    let (tx, rx) = oneshot::channel();
    if app.commands.send(Command::Subscribe(tx)).await.is_err() {
        return;
    }
    let Ok(mut sub) = rx.await else { return };
    let (mut sink, mut incoming) = socket.split();
    let mut session = Session::new(id, app.history_capacity);

    let mut initial = Vec::with_capacity(sub.backfill.len() + 3);
    match &sub.scene {
        Some(state) => {
            session.observe_model(state.model.clone());
            initial.extend(scene_messages(state));
        }
        None => initial.push(ServerMessage::Notice { message: "awaiting model".into() }),
    }
    for frame in &sub.backfill {
        session.observe_frame(frame);
        initial.push(ServerMessage::Frame(MetricFrame::clone(frame)));
    }
    initial.push(ServerMessage::Live { next_window: Some(sub.next_window) });
    debug!(session = id, backfill = sub.backfill.len(), "client subscribed");

    let send_all = |msgs: Vec<ServerMessage>| {
        futures::stream::iter(msgs.into_iter().map(|m| Ok(Message::Text(m.to_line().into()))))
    };
    if sink.send_all(&mut send_all(initial)).await.is_err() {
        return;
    }

    loop {
        let out = tokio::select! {
            outbound = sub.rx.recv() => match outbound {
                Ok(Outbound::Scene(state)) => {
                    let mut msgs = scene_messages(&state).to_vec();
                    msgs.extend(session.observe_model(state.model.clone()));
                    msgs
                }
                Ok(Outbound::Frame(frame)) => {
                    session.observe_frame(&frame);
                    vec![ServerMessage::Frame(MetricFrame::clone(&frame))]
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    let msg = ServerMessage::error("Lagged", format!("client fell {n} messages behind"));
                    let _ = sink.send(Message::Text(msg.to_line().into())).await;
                    break;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            request = incoming.next() => match request {
                Some(Ok(Message::Text(text))) => vec![match ClientRequest::parse(&text) {
                    Ok(req) => session.handle(&req),
                    Err(e) => ServerMessage::error("MalformedRecord", e),
                }],
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
        };
        if sink.send_all(&mut send_all(out)).await.is_err() {
            break;
        }
    }
    let _ = sink.close().await;
    debug!(session = id, "client session ended");
}
