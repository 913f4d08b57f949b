//! Client channel messages. Bodies reuse the wire-record schemas: frames
//! and control records are identical to their ingest-protocol forms.

use serde::{Deserialize, Serialize};

use crate::history::ViewCursor;
use crate::ingest::{ControlRecord, MetricFrame};
use crate::layout::CityScene;
use crate::model::ClassId;

/// Which view an interaction originated from. Informational only: the
/// resulting selection state does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Building,
    Mark,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SelectionState {
    pub selected: Option<ClassId>,
    pub hover: Option<ClassId>,
}

/// Text for the heads-up label; both fields are `None` when hover clears.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HoverInfo {
    pub class_id: Option<ClassId>,
    pub name: Option<String>,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ServerMessage {
    Notice { message: String },
    Scene(CityScene),
    #[serde(rename_all = "camelCase")]
    Order { model_revision: u64, classes: Vec<ClassId> },
    Frame(MetricFrame),
    /// End of backfill; frames after this are live.
    #[serde(rename_all = "camelCase")]
    Live { next_window: Option<u64> },
    Selection(SelectionState),
    Hover(HoverInfo),
    Cursor(ViewCursor),
    Error { code: String, message: String },
}

impl ServerMessage {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error { code: code.to_string(), message: message.into() }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClientRequest {
    Control(ControlRecord),
    #[serde(rename_all = "camelCase")]
    Select {
        class_id: Option<ClassId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        via: Option<View>,
    },
    #[serde(rename_all = "camelCase")]
    Hover {
        class_id: Option<ClassId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        via: Option<View>,
    },
}

impl ClientRequest {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("client requests always serialize")
    }
}
