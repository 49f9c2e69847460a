//! Line-delimited JSON codec for event logs.
//!
//! One canonical JSON object per line: keys sorted, absent optionals omitted
//! (never null), LF line separator, and a reserved `schema: 1` field on every
//! line. Encoding the same event always yields the same bytes, which is what
//! makes log fixtures and transport diffs stable.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde_json::{Map, Value};

use crate::event::{CausalEvent, EventType};
use crate::time::Timestamp;

/// Log line schema revision understood by this codec.
pub const LINE_SCHEMA: u64 = 1;

/// Encode an event as one canonical JSON line (no trailing newline).
///
/// Keys are emitted in sorted order at every nesting level because the
/// underlying JSON map is ordered; `schema` is injected alongside the event
/// fields.
pub fn encode_event(event: &CausalEvent) -> String {
    let mut value = serde_json::to_value(event).expect("event serialization cannot fail");
    let obj = value.as_object_mut().expect("event serializes to an object");
    obj.insert("schema".to_string(), Value::from(LINE_SCHEMA));
    serde_json::to_string(&value).expect("value serialization cannot fail")
}

/// A decoded line plus codec-level observations about it.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub event: CausalEvent,
    /// The embedded event_id did not match recomputation. The event is still
    /// accepted (the source may predate the ID scheme); ingest surfaces the
    /// count in its report.
    pub id_mismatch: bool,
}

/// Why a line was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    MalformedLine(String),
    UnknownEventType(String),
    MalformedTimestamp(String),
    UnsupportedSchema(u64),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::MalformedLine(d) => write!(f, "malformed line: {d}"),
            DecodeError::UnknownEventType(t) => write!(f, "unknown event type {t:?}"),
            DecodeError::MalformedTimestamp(d) => write!(f, "malformed timestamp: {d}"),
            DecodeError::UnsupportedSchema(v) => write!(f, "unsupported line schema {v}"),
        }
    }
}

impl core::error::Error for DecodeError {}

fn take_string(obj: &Map<String, Value>, key: &str) -> Result<String, DecodeError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(DecodeError::MalformedLine(format!("field {key:?} must be a string"))),
        None => Err(DecodeError::MalformedLine(format!("missing field {key:?}"))),
    }
}

fn take_opt_string(obj: &Map<String, Value>, key: &str) -> Result<Option<String>, DecodeError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Null) | None => Ok(None),
        Some(_) => Err(DecodeError::MalformedLine(format!("field {key:?} must be a string"))),
    }
}

/// Decode one log line into an event.
///
/// The timestamp is normalized to UTC (inputs may carry any offset), and the
/// embedded ID is checked against recomputation over the normalized identity.
pub fn decode_event(line: &str) -> Result<Decoded, DecodeError> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| DecodeError::MalformedLine(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| DecodeError::MalformedLine("line is not a JSON object".to_string()))?;

    match obj.get("schema") {
        None => {}
        Some(v) => match v.as_u64() {
            Some(LINE_SCHEMA) => {}
            Some(other) => return Err(DecodeError::UnsupportedSchema(other)),
            None => {
                return Err(DecodeError::MalformedLine("schema must be an integer".to_string()))
            }
        },
    }

    let type_str = take_string(obj, "event_type")?;
    let event_type = EventType::from_str(&type_str)
        .map_err(|e| DecodeError::UnknownEventType(e.0))?;

    let raw_ts = take_string(obj, "timestamp")?;
    let timestamp =
        Timestamp::parse(&raw_ts).map_err(|e| DecodeError::MalformedTimestamp(e.to_string()))?;

    let event_id = take_string(obj, "event_id")?;
    let namespace = take_string(obj, "namespace")?;
    let discriminator = match obj.get("discriminator") {
        None => 0,
        Some(v) => v.as_u64().and_then(|n| u32::try_from(n).ok()).ok_or_else(|| {
            DecodeError::MalformedLine("discriminator must be a small integer".to_string())
        })?,
    };
    let payload = match obj.get("payload") {
        None => Default::default(),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| DecodeError::MalformedLine(format!("bad payload: {e}")))?,
    };

    let event = CausalEvent {
        event_id,
        timestamp,
        event_type,
        pattern_id: take_opt_string(obj, "pattern_id")?,
        namespace,
        pod_name: take_opt_string(obj, "pod_name")?,
        container_name: take_opt_string(obj, "container_name")?,
        node_name: take_opt_string(obj, "node_name")?,
        configmap_name: take_opt_string(obj, "configmap_name")?,
        discriminator,
        payload,
    };
    let id_mismatch = event.event_id != event.computed_id();
    Ok(Decoded { event, id_mismatch })
}

/// Render any serializable value as canonical JSON: keys sorted at every
/// level, compact separators. All user-facing JSON goes through here so CLI
/// and HTTP outputs are byte-identical.
pub fn canonical_json<T: serde::Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serialization cannot fail");
    serde_json::to_string(&v).expect("canonical serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{compute_event_id, EventPayload};

    fn sample_event() -> CausalEvent {
        let timestamp = Timestamp::parse("2026-01-15T10:00:10Z").unwrap();
        let mut ev = CausalEvent {
            event_id: String::new(),
            timestamp,
            event_type: EventType::ConfigMapChanged,
            pattern_id: None,
            namespace: "oma-poc".into(),
            pod_name: None,
            container_name: None,
            node_name: None,
            configmap_name: Some("app-config".into()),
            discriminator: 0,
            payload: EventPayload {
                content_hash_before: Some("aaaa".into()),
                content_hash_after: Some("bbbb".into()),
                changed_keys: Some(alloc::vec!["FEATURE_FLAG".into()]),
                ..Default::default()
            },
        };
        ev.event_id = ev.computed_id();
        ev
    }

    #[test]
    fn minimal_line_contains_expected_keys_and_no_null() {
        let line = encode_event(&sample_event());
        for key in ["event_id", "timestamp", "event_type", "namespace", "configmap_name", "payload", "schema"] {
            assert!(line.contains(&format!("\"{key}\"")), "missing {key} in {line}");
        }
        assert!(!line.contains("null"), "absent optionals must be omitted: {line}");
        assert!(!line.contains("pod_name"));
    }

    #[test]
    fn keys_are_sorted_at_every_level() {
        let line = encode_event(&sample_event());
        let v: Value = serde_json::from_str(&line).unwrap();
        fn assert_sorted(v: &Value) {
            if let Value::Object(m) = v {
                let keys: alloc::vec::Vec<_> = m.keys().collect();
                let mut sorted = keys.clone();
                sorted.sort();
                assert_eq!(keys, sorted);
                m.values().for_each(assert_sorted);
            }
        }
        assert_sorted(&v);
        // serde_json::Map is btree-backed here, so re-serialization is stable.
        assert_eq!(serde_json::to_string(&v).unwrap(), line);
    }

    #[test]
    fn round_trip_preserves_event() {
        let ev = sample_event();
        let decoded = decode_event(&encode_event(&ev)).unwrap();
        assert_eq!(decoded.event, ev);
        assert!(!decoded.id_mismatch);
    }

    #[test]
    fn exit_code_is_emitted_as_plain_integer() {
        let mut ev = sample_event();
        ev.event_type = EventType::OOMKill;
        ev.configmap_name = None;
        ev.pod_name = Some("oom-app".into());
        ev.container_name = Some("app".into());
        ev.payload = EventPayload {
            exit_code: Some(137),
            reason: Some("OOMKilled".into()),
            ..Default::default()
        };
        ev.event_id = ev.computed_id();
        let line = encode_event(&ev);
        assert!(line.contains("\"exit_code\":137"), "{line}");
    }

    #[test]
    fn unknown_event_type_is_a_specific_error() {
        let line = r#"{"event_id":"0000000000000000","event_type":"PodEvicted","namespace":"ns","payload":{},"schema":1,"timestamp":"2026-01-15T10:00:00Z"}"#;
        assert!(matches!(decode_event(line), Err(DecodeError::UnknownEventType(_))));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(matches!(decode_event("not json"), Err(DecodeError::MalformedLine(_))));
        assert!(matches!(decode_event("[1,2]"), Err(DecodeError::MalformedLine(_))));
        let missing_ns = r#"{"event_id":"00","event_type":"OOMKill","payload":{},"timestamp":"2026-01-15T10:00:00Z"}"#;
        assert!(matches!(decode_event(missing_ns), Err(DecodeError::MalformedLine(_))));
        let bad_ts = r#"{"event_id":"00","event_type":"OOMKill","namespace":"ns","payload":{},"timestamp":"yesterday"}"#;
        assert!(matches!(decode_event(bad_ts), Err(DecodeError::MalformedTimestamp(_))));
        let bad_schema = r#"{"event_id":"00","event_type":"OOMKill","namespace":"ns","payload":{},"schema":2,"timestamp":"2026-01-15T10:00:00Z"}"#;
        assert!(matches!(decode_event(bad_schema), Err(DecodeError::UnsupportedSchema(2))));
    }

    #[test]
    fn offset_timestamps_normalize_and_ids_still_match() {
        let ev = sample_event();
        let line = encode_event(&ev).replace("2026-01-15T10:00:10Z", "2026-01-15T05:00:10-05:00");
        let decoded = decode_event(&line).unwrap();
        assert_eq!(decoded.event.timestamp, ev.timestamp);
        assert!(!decoded.id_mismatch, "canonicalized identity must match embedded id");
    }

    #[test]
    fn foreign_ids_are_flagged_not_rejected() {
        let ev = sample_event();
        let line = encode_event(&ev).replace(&ev.event_id, "ffffffffffffffff");
        let decoded = decode_event(&line).unwrap();
        assert!(decoded.id_mismatch);
        assert_eq!(decoded.event.event_id, "ffffffffffffffff");
    }

    #[test]
    fn id_depends_on_discriminator_through_decode() {
        let t = Timestamp::parse("2026-01-15T10:00:00Z").unwrap();
        let id0 = compute_event_id(EventType::OOMKillEvidence, "ns", Some("p"), Some("c"), None, t, 0);
        let id1 = compute_event_id(EventType::OOMKillEvidence, "ns", Some("p"), Some("c"), None, t, 1);
        let line = format!(
            r#"{{"container_name":"c","event_id":"{id1}","event_type":"OOMKillEvidence","discriminator":1,"namespace":"ns","payload":{{}},"pod_name":"p","timestamp":"2026-01-15T10:00:00Z"}}"#
        );
        let decoded = decode_event(&line).unwrap();
        assert!(!decoded.id_mismatch);
        assert_ne!(id0, id1);
    }
}
