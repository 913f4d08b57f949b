//! Single-writer state owner: model, scene, aggregator, and history.
//!
//! Everything that mutates server state runs on one task fed by a command
//! channel. Outbound scene documents and frames go through one broadcast
//! channel, so every subscriber sees them in the order they were produced.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::Instant;
use tracing::{debug, info, warn};

use super::ServerConfig;
use crate::history::HistoryBuffer;
use crate::ingest::{CallEvent, DropTally, MetricFrame, WindowAggregator};
use crate::layout::{layout_city, CityScene};
use crate::model::{apply_model_update, class_order, validate_model, ClassId, ModelError, ModelRecord, SystemModel};

pub(crate) const BROADCAST_CAPACITY: usize = 4096;

/// Scene bundle for one model revision.
#[derive(Debug)]
pub(crate) struct SceneState {
    pub model: Arc<SystemModel>,
    pub scene: CityScene,
    pub order: Vec<ClassId>,
}

#[derive(Debug, Clone)]
pub(crate) enum Outbound {
    Scene(Arc<SceneState>),
    Frame(Arc<MetricFrame>),
}

pub(crate) struct Subscription {
    pub scene: Option<Arc<SceneState>>,
    pub backfill: Vec<Arc<MetricFrame>>,
    pub next_window: u64,
    pub rx: broadcast::Receiver<Outbound>,
}

/// Point-in-time view of server state.
#[derive(Debug, Clone)]
pub struct Status {
    pub model_revision: Option<u64>,
    pub history: HistoryBuffer,
    pub tally: DropTally,
    pub events_accepted: u64,
    pub frames_emitted: u64,
    /// Index of the window currently accumulating.
    pub open_window: u64,
}

pub(crate) enum Command {
    Model { conn: u64, record: ModelRecord, reply: Option<oneshot::Sender<Result<u64, ModelError>>> },
    Event { conn: u64, event: CallEvent },
    Disconnect { conn: u64 },
    Subscribe(oneshot::Sender<Subscription>),
    Status(oneshot::Sender<Status>),
    Shutdown(oneshot::Sender<Option<MetricFrame>>),
}

pub(crate) struct Hub {
    cfg: ServerConfig,
    scene: Option<Arc<SceneState>>,
    aggregator: WindowAggregator,
    history: HistoryBuffer,
    tx: broadcast::Sender<Outbound>,
    /// Per-connection timestamp shift, fixed at each connection's first event.
    offsets: HashMap<u64, u64>,
    /// Newest accepted event time and when it arrived, for idle closing.
    clock: Option<(u64, Instant)>,
    events_accepted: u64,
    frames_emitted: u64,
}

impl Hub {
    pub fn new(cfg: ServerConfig) -> Self {
        let (tx, _) = broadcast::channel(BROADCAST_CAPACITY);
        Self {
            aggregator: WindowAggregator::new(cfg.window_ms),
            history: HistoryBuffer::new(cfg.history_capacity).expect("validated capacity"),
            scene: None,
            tx,
            offsets: HashMap::new(),
            clock: None,
            events_accepted: 0,
            frames_emitted: 0,
            cfg,
        }
    }

    pub async fn run(mut self, mut commands: mpsc::Receiver<Command>) {
        let tick = Duration::from_millis((self.cfg.window_ms / 50).clamp(2, 20));
        let mut ticker = tokio::time::interval(tick);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            tokio::select! {
                cmd = commands.recv() => match cmd {
                    Some(Command::Shutdown(reply)) => {
                        let last = self.shutdown();
                        let _ = reply.send(last);
                        break;
                    }
                    Some(cmd) => self.handle(cmd),
                    None => break,
                },
                _ = ticker.tick() => self.close_idle(Instant::now()),
            }
        }
        debug!("hub stopped");
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Model { conn, record, reply } => {
                let result = self.apply_model(&record);
                if let Err(e) = &result {
                    warn!(conn, error = %e, "rejected model record");
                }
                if let Some(reply) = reply {
                    let _ = reply.send(result);
                }
            }
            Command::Event { conn, event } => self.accept_event(conn, event),
            Command::Disconnect { conn } => {
                self.offsets.remove(&conn);
            }
            Command::Subscribe(reply) => {
                let _ = reply.send(Subscription {
                    scene: self.scene.clone(),
                    backfill: self.history.frames().cloned().collect(),
                    next_window: self.aggregator.current_window(),
                    rx: self.tx.subscribe(),
                });
            }
            Command::Status(reply) => {
                let _ = reply.send(Status {
                    model_revision: self.scene.as_ref().map(|s| s.model.revision()),
                    history: self.history.clone(),
                    tally: self.aggregator.tally(),
                    events_accepted: self.events_accepted,
                    frames_emitted: self.frames_emitted,
                    open_window: self.aggregator.current_window(),
                });
            }
            Command::Shutdown(_) => unreachable!("handled in run"),
        }
    }

    fn apply_model(&mut self, record: &ModelRecord) -> Result<u64, ModelError> {
        let model = match &self.scene {
            None => validate_model(record)?,
            Some(current) => apply_model_update(&current.model, record)?,
        };
        self.aggregator.retain_known(&model);
        let scene = layout_city(&model, &self.cfg.layout).normalized(self.cfg.scale);
        let order = class_order(&model);
        let revision = model.revision();
        info!(revision, classes = model.len(), "model installed");
        let state = Arc::new(SceneState { model: Arc::new(model), scene, order });
        self.scene = Some(state.clone());
        let _ = self.tx.send(Outbound::Scene(state));
        Ok(revision)
    }

    fn accept_event(&mut self, conn: u64, mut event: CallEvent) {
        // A sender whose clock starts behind the stream (e.g. a second
        // replay) is shifted so its first event opens the next window.
        let start = self.aggregator.current_start_ms();
        let end = self.aggregator.current_end_ms();
        let offset = *self.offsets.entry(conn).or_insert_with(|| {
            if self.clock.is_some() && event.timestamp_ms < start {
                end - event.timestamp_ms
            } else {
                0
            }
        });
        event.timestamp_ms += offset;

        let mut frames = Vec::new();
        let model = self.scene.as_ref().map(|s| s.model.clone());
        match self.aggregator.push(&event, model.as_deref(), &mut frames) {
            Ok(()) => self.events_accepted += 1,
            Err(e) => debug!(conn, error = %e, "event dropped"),
        }
        if self.clock.is_none_or(|(t, _)| event.timestamp_ms >= t) {
            self.clock = Some((event.timestamp_ms, Instant::now()));
        }
        self.emit(frames);
    }

    /// Closes windows whose end the stream clock has passed by the grace
    /// period. Stream time is estimated from the newest event plus the wall
    /// time since it arrived.
    fn close_idle(&mut self, now: Instant) {
        let Some((last_ms, at)) = self.clock else { return };
        let estimate = last_ms + now.saturating_duration_since(at).as_millis() as u64;
        let mut frames = Vec::new();
        self.aggregator.advance_to(estimate.saturating_sub(self.idle_grace_ms()), &mut frames);
        self.emit(frames);
    }

    fn idle_grace_ms(&self) -> u64 {
        self.cfg.window_ms / 20
    }

    fn shutdown(&mut self) -> Option<MetricFrame> {
        self.clock?;
        let last = self.aggregator.flush();
        self.emit(vec![last.clone()]);
        Some(last)
    }

    fn emit(&mut self, frames: Vec<MetricFrame>) {
        for frame in frames {
            let frame = Arc::new(frame);
            self.history.push_frame(frame.clone()).expect("aggregator emits frames in order");
            self.frames_emitted += 1;
            let _ = self.tx.send(Outbound::Frame(frame));
        }
    }
}
