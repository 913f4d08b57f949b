//! Per-client state: view cursor and linked selection.

use std::collections::VecDeque;
use std::sync::Arc;

use super::protocol::{ClientRequest, HoverInfo, SelectionState, ServerMessage};
use super::ServiceError;
use crate::history::{ViewCursor, WindowRange};
use crate::ingest::{ControlRecord, MetricFrame};
use crate::model::SystemModel;

/// One connected client. The session mirrors the window indices held by
/// the server's history from the frames it has been sent, so cursor
/// requests are checked without touching shared state.
#[derive(Debug, Clone)]
pub struct Session {
    id: u64,
    cursor: ViewCursor,
    selection: SelectionState,
    model: Option<Arc<SystemModel>>,
    buffered: VecDeque<u64>,
    capacity: usize,
}

impl Session {
    pub fn new(id: u64, history_capacity: usize) -> Self {
        Self {
            id,
            cursor: ViewCursor::default(),
            selection: SelectionState::default(),
            model: None,
            buffered: VecDeque::with_capacity(history_capacity),
            capacity: history_capacity.max(1),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn cursor(&self) -> ViewCursor {
        self.cursor
    }

    pub fn selection(&self) -> &SelectionState {
        &self.selection
    }

    pub fn range(&self) -> Option<WindowRange> {
        Some(WindowRange { oldest: *self.buffered.front()?, newest: *self.buffered.back()? })
    }

    pub fn observe_frame(&mut self, frame: &MetricFrame) {
        if self.buffered.len() == self.capacity {
            self.buffered.pop_front();
        }
        self.buffered.push_back(frame.window_index);
        self.cursor.sync(self.range());
    }

    /// Installs a new model revision. Selection and hover that point at
    /// removed classes are cleared; the returned messages tell the client.
    pub fn observe_model(&mut self, model: Arc<SystemModel>) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        let dangling = |id: &Option<String>| id.as_ref().is_some_and(|id| !model.contains(id));
        let hover_gone = dangling(&self.selection.hover);
        let selected_gone = dangling(&self.selection.selected);
        if hover_gone {
            self.selection.hover = None;
            out.push(ServerMessage::Hover(HoverInfo::default()));
        }
        if selected_gone {
            self.selection.selected = None;
        }
        if hover_gone || selected_gone {
            out.push(ServerMessage::Selection(self.selection.clone()));
        }
        self.model = Some(model);
        out
    }

    fn check(&self, target: Option<&str>) -> Result<(), ServiceError> {
        match target {
            Some(id) if !self.model.as_ref().is_some_and(|m| m.contains(id)) => {
                Err(ServiceError::UnknownClass(id.to_string()))
            }
            _ => Ok(()),
        }
    }

    /// Sets (or clears) the selected class. The same state results whether
    /// the client picked a building or a scatter mark.
    pub fn select(&mut self, target: Option<&str>) -> Result<SelectionState, ServiceError> {
        self.check(target)?;
        self.selection.selected = target.map(str::to_string);
        Ok(self.selection.clone())
    }

    pub fn hover(&mut self, target: Option<&str>) -> Result<HoverInfo, ServiceError> {
        self.check(target)?;
        self.selection.hover = target.map(str::to_string);
        Ok(match (target, &self.model) {
            (Some(id), Some(model)) => HoverInfo {
                class_id: Some(id.to_string()),
                name: model.class(id).map(|c| c.name.clone()),
            },
            _ => HoverInfo::default(),
        })
    }

    pub fn control(&mut self, record: &ControlRecord) -> Result<ViewCursor, ServiceError> {
        self.cursor = self.cursor.set_cursor(record.action, record.arg, self.range())?;
        Ok(self.cursor)
    }

    pub fn handle(&mut self, request: &ClientRequest) -> ServerMessage {
        let result = match request {
            ClientRequest::Select { class_id, .. } => {
                self.select(class_id.as_deref()).map(ServerMessage::Selection)
            }
            ClientRequest::Hover { class_id, .. } => {
                self.hover(class_id.as_deref()).map(ServerMessage::Hover)
            }
            ClientRequest::Control(rec) => self.control(rec).map(ServerMessage::Cursor),
        };
        result.unwrap_or_else(|e| ServerMessage::error(e.code(), e.to_string()))
    }
}
