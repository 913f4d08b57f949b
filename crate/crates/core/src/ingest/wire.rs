//! Wire protocol v1: one JSON object per line, discriminated by `kind`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{ClassId, ModelRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("unknown record kind `{0}`")]
    UnknownKind(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

/// A batch of `count` invocations of methods of one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CallEvent {
    pub class_id: ClassId,
    pub count: u64,
    pub timestamp_ms: u64,
}

impl CallEvent {
    pub fn new(class_id: impl Into<ClassId>, count: u64, timestamp_ms: u64) -> Self {
        Self { class_id: class_id.into(), count, timestamp_ms }
    }
}

/// Per-class call totals for one window `[windowStartMs, windowStartMs + windowMs)`.
/// Classes with zero calls are absent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricFrame {
    pub window_index: u64,
    pub window_start_ms: u64,
    pub counts: BTreeMap<ClassId, u64>,
}

impl MetricFrame {
    pub fn count(&self, class_id: &str) -> u64 {
        self.counts.get(class_id).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlAction {
    Pause,
    Resume,
    Seek,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub action: ControlAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WireRecord {
    Model(ModelRecord),
    Event(CallEvent),
    Frame(MetricFrame),
    Control(ControlRecord),
}

/// Serializes a record as a single line, without the trailing newline.
pub fn encode_record(record: &WireRecord) -> String {
    serde_json::to_string(record).expect("wire records always serialize")
}

pub fn decode_record(line: &str) -> Result<WireRecord, DecodeError> {
    if line.contains('\n') {
        return Err(DecodeError::MalformedRecord("embedded newline".into()));
    }
    let value: Value =
        serde_json::from_str(line).map_err(|e| DecodeError::MalformedRecord(e.to_string()))?;
    let kind = match value.as_object().map(|o| o.get("kind")) {
        None => return Err(DecodeError::SchemaViolation("record is not an object".into())),
        Some(None) => return Err(DecodeError::SchemaViolation("missing `kind`".into())),
        Some(Some(Value::String(k))) => k.clone(),
        Some(Some(_)) => return Err(DecodeError::SchemaViolation("`kind` is not a string".into())),
    };
    let record = match kind.as_str() {
        "model" => WireRecord::Model(body(value)?),
        "event" => WireRecord::Event(body(value)?),
        "frame" => WireRecord::Frame(body(value)?),
        "control" => WireRecord::Control(body(value)?),
        _ => return Err(DecodeError::UnknownKind(kind)),
    };
    check_invariants(&record)?;
    Ok(record)
}

fn body<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, DecodeError> {
    serde_json::from_value(value).map_err(|e| DecodeError::SchemaViolation(e.to_string()))
}

fn check_invariants(record: &WireRecord) -> Result<(), DecodeError> {
    match record {
        WireRecord::Event(e) if e.count == 0 => {
            Err(DecodeError::SchemaViolation("event count must be at least 1".into()))
        }
        WireRecord::Frame(f) if f.counts.values().any(|&c| c == 0) => {
            Err(DecodeError::SchemaViolation("frame counts must not contain zeros".into()))
        }
        WireRecord::Control(ControlRecord { action: ControlAction::Seek, arg: None }) => {
            Err(DecodeError::SchemaViolation("seek requires `arg`".into()))
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassRecord, PackageRecord};

    #[test]
    fn decodes_event() {
        let r = decode_record(r#"{"kind":"event","classId":"app.A","count":2,"timestampMs":120}"#);
        assert_eq!(r, Ok(WireRecord::Event(CallEvent::new("app.A", 2, 120))));
    }

    #[test]
    fn typed_errors() {
        assert_eq!(decode_record(r#"{"kind":"noise"}"#), Err(DecodeError::UnknownKind("noise".into())));
        assert!(matches!(decode_record(r#"{"kind":"event""#), Err(DecodeError::MalformedRecord(_))));
        assert!(matches!(decode_record("[1,2]"), Err(DecodeError::SchemaViolation(_))));
        assert!(matches!(decode_record(r#"{"classId":"a"}"#), Err(DecodeError::SchemaViolation(_))));
        assert!(matches!(decode_record(r#"{"kind":7}"#), Err(DecodeError::SchemaViolation(_))));
        assert!(matches!(
            decode_record(r#"{"kind":"event","classId":"a","count":"2","timestampMs":1}"#),
            Err(DecodeError::SchemaViolation(_))
        ));
        assert!(matches!(
            decode_record(r#"{"kind":"event","classId":"a","count":0,"timestampMs":1}"#),
            Err(DecodeError::SchemaViolation(_))
        ));
        assert!(matches!(
            decode_record(r#"{"kind":"event","classId":"a","count":1,"timestampMs":-4}"#),
            Err(DecodeError::SchemaViolation(_))
        ));
        assert!(matches!(
            decode_record(r#"{"kind":"control","action":"seek"}"#),
            Err(DecodeError::SchemaViolation(_))
        ));
        assert!(matches!(
            decode_record(r#"{"kind":"frame","windowIndex":0,"windowStartMs":0,"counts":{"a":0}}"#),
            Err(DecodeError::SchemaViolation(_))
        ));
        assert!(matches!(decode_record("{\"kind\":\n\"event\"}"), Err(DecodeError::MalformedRecord(_))));
    }

    #[test]
    fn negative_metrics_survive_decoding_for_validation() {
        let line = r#"{"kind":"model","packages":[],"classes":[{"id":"a.A","name":"A","packagePath":["a"],"numMethods":-1,"numAttributes":0}]}"#;
        let Ok(WireRecord::Model(m)) = decode_record(line) else { panic!() };
        assert_eq!(m.classes[0].num_methods, -1);
    }

    #[test]
    fn event_encodes_to_one_line() {
        let line = encode_record(&WireRecord::Event(CallEvent::new("app.A", 1, 0)));
        assert!(!line.contains('\n'));
        assert!(line.contains(r#""kind":"event""#));
    }

    #[test]
    fn model_round_trip() {
        let class = |id: &str| ClassRecord {
            id: id.into(),
            name: id[4..].into(),
            package_path: vec!["app".into()],
            num_methods: 4,
            num_attributes: 1,
        };
        let rec = WireRecord::Model(ModelRecord {
            revision: Some(3),
            packages: vec![PackageRecord {
                name: "app".into(),
                children: vec![],
                classes: vec!["app.A".into(), "app.B".into()],
            }],
            classes: vec![class("app.A"), class("app.B")],
        });
        let decoded = decode_record(&encode_record(&rec)).unwrap();
        assert_eq!(decoded, rec);
        let WireRecord::Model(m) = decoded else { unreachable!() };
        let model = crate::model::validate_model(&m).unwrap();
        assert_eq!(model.len(), 2);
    }
}
