//! The long-running server: profiler ingest, windowing, history, and the
//! client channel with per-session cursor and linked selection.

mod hub;
pub mod protocol;
mod server;
mod session;

use std::net::SocketAddr;

use thiserror::Error;

use crate::history::{HistoryError, DEFAULT_HISTORY_CAPACITY};
use crate::ingest::DEFAULT_WINDOW_MS;
use crate::layout::{LayoutConfig, LayoutError};
use crate::model::ClassId;

pub use hub::Status;
pub use protocol::{ClientRequest, HoverInfo, SelectionState, ServerMessage, View};
pub use server::{run_server, ServerHandle};
pub use session::Session;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown class `{0}`")]
    UnknownClass(ClassId),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("server is shut down")]
    Stopped,
}

impl ServiceError {
    /// Short machine-readable code used in client `error` messages.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::BindFailure { .. } => "BindFailure",
            ServiceError::InvalidConfig(_) => "InvalidConfig",
            ServiceError::UnknownClass(_) => "UnknownClass",
            ServiceError::History(HistoryError::SeekOutOfRange { .. }) => "SeekOutOfRange",
            ServiceError::History(HistoryError::OutOfOrderFrame { .. }) => "OutOfOrderFrame",
            ServiceError::History(_) => "InvalidControl",
            ServiceError::Stopped => "Stopped",
        }
    }
}

impl PartialEq for ServiceError {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::UnknownClass(a), Self::UnknownClass(b)) => a == b,
            (Self::History(a), Self::History(b)) => a == b,
            (Self::InvalidConfig(a), Self::InvalidConfig(b)) => a == b,
            (Self::BindFailure { addr: a, .. }, Self::BindFailure { addr: b, .. }) => a == b,
            (Self::Stopped, Self::Stopped) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    /// Where profilers and the replay harness connect (line-delimited records over TCP).
    pub ingest_address: SocketAddr,
    /// Where UI clients connect (WebSocket at `/ws`).
    pub client_address: SocketAddr,
    pub window_ms: u64,
    pub history_capacity: usize,
    pub layout: LayoutConfig,
    /// Length of the longer ground edge of the served scene.
    pub scale: f64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            ingest_address: ([127, 0, 0, 1], 7070).into(),
            client_address: ([127, 0, 0, 1], 7071).into(),
            window_ms: DEFAULT_WINDOW_MS,
            history_capacity: DEFAULT_HISTORY_CAPACITY,
            layout: LayoutConfig::default(),
            scale: 1.0,
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        let invalid = |m: &str| Err(ServiceError::InvalidConfig(m.to_string()));
        // Port 0 asks the OS for a fresh port, so two such addresses never clash.
        if self.ingest_address == self.client_address && self.ingest_address.port() != 0 {
            return invalid("ingest and client addresses must differ");
        }
        if self.window_ms == 0 {
            return invalid("window length must be at least 1 ms");
        }
        if self.history_capacity == 0 {
            return invalid("history capacity must be at least 1");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return invalid("scale must be positive");
        }
        self.layout.validate().map_err(|e: LayoutError| ServiceError::InvalidConfig(e.to_string()))
    }
}
