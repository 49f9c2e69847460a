//! The event model: typed lifecycle events, causal edges, and snapshots.
//!
//! Event identity is deterministic: the ID is a truncated SHA-256 over the
//! pipe-joined identity fields, so replaying the same source stream always
//! produces the same IDs and duplicate delivery is detectable by key.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::time::Timestamp;

/// Closed set of lifecycle event types. Unknown strings are a decode error.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum EventType {
    NodeMemoryPressure,
    OOMKill,
    OOMKillEvidence,
    ContainerTerminated,
    ContainerStarted,
    PodDeleted,
    ConfigMapChanged,
    KubeletSync,
    PodNotRestarted,
}

impl EventType {
    pub const ALL: [EventType; 9] = [
        EventType::NodeMemoryPressure,
        EventType::OOMKill,
        EventType::OOMKillEvidence,
        EventType::ContainerTerminated,
        EventType::ContainerStarted,
        EventType::PodDeleted,
        EventType::ConfigMapChanged,
        EventType::KubeletSync,
        EventType::PodNotRestarted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::NodeMemoryPressure => "NodeMemoryPressure",
            EventType::OOMKill => "OOMKill",
            EventType::OOMKillEvidence => "OOMKillEvidence",
            EventType::ContainerTerminated => "ContainerTerminated",
            EventType::ContainerStarted => "ContainerStarted",
            EventType::PodDeleted => "PodDeleted",
            EventType::ConfigMapChanged => "ConfigMapChanged",
            EventType::KubeletSync => "KubeletSync",
            EventType::PodNotRestarted => "PodNotRestarted",
        }
    }
}

impl FromStr for EventType {
    type Err = UnknownEventType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownEventType(s.to_string()))
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownEventType(pub String);

impl fmt::Display for UnknownEventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown event type {:?}", self.0)
    }
}

impl core::error::Error for UnknownEventType {}

/// Kubernetes QoS class of a pod.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum QosClass {
    Guaranteed,
    Burstable,
    BestEffort,
}

/// How a pod consumes a ConfigMap. Env-mode values are resolved once at
/// container start; volume-mode projections are refreshed by the kubelet.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsumeMode {
    Env,
    Volume,
}

impl ConsumeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConsumeMode::Env => "env",
            ConsumeMode::Volume => "volume",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ConfigMapRef {
    pub name: String,
    pub mode: ConsumeMode,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct NodeSnapshot {
    pub allocatable_memory_bytes: u64,
    pub memory_pressure: bool,
    pub node_name: String,
}

/// Per-event captured data. All fields optional; which are populated depends
/// on the event type (e.g. the OOMKillEvidence forensic bundle carries
/// limits, QoS, restart count, ConfigMap refs, and a node snapshot).
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct EventPayload {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_at: Option<Timestamp>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<Timestamp>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_limit_bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_request_bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpu_limit_millicores: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpu_request_millicores: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qos_class: Option<QosClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart_count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub configmap_refs: Option<Vec<ConfigMapRef>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content_hash_before: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content_hash_after: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub changed_keys: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_snapshot: Option<NodeSnapshot>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagation_latency_ms: Option<u64>,
    /// Frozen object state carried by PodDeleted events; the ingest layer
    /// materializes it as a point-in-time snapshot.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_state: Option<Value>,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

/// An immutable lifecycle event with a deterministic identity.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CausalEvent {
    pub event_id: String,
    pub timestamp: Timestamp,
    pub event_type: EventType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern_id: Option<String>,
    pub namespace: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pod_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub container_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub configmap_name: Option<String>,
    /// Distinguishes events that would otherwise share every identity field
    /// (same type, scope, and microsecond). Zero for almost all events.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub discriminator: u32,
    pub payload: EventPayload,
}

impl CausalEvent {
    /// Recompute this event's deterministic ID from its identity fields.
    pub fn computed_id(&self) -> String {
        compute_event_id(
            self.event_type,
            &self.namespace,
            self.pod_name.as_deref(),
            self.container_name.as_deref(),
            self.configmap_name.as_deref(),
            self.timestamp,
            self.discriminator,
        )
    }
}

/// First 16 hex chars of SHA-256 over the pipe-joined identity fields.
/// Absent optional fields contribute an empty string; the timestamp
/// contributes its canonical serialized form.
pub fn compute_event_id(
    event_type: EventType,
    namespace: &str,
    pod_name: Option<&str>,
    container_name: Option<&str>,
    configmap_name: Option<&str>,
    timestamp: Timestamp,
    discriminator: u32,
) -> String {
    let canonical = alloc::format!(
        "{}|{}|{}|{}|{}|{}|{}",
        event_type.as_str(),
        namespace,
        pod_name.unwrap_or(""),
        container_name.unwrap_or(""),
        configmap_name.unwrap_or(""),
        timestamp,
        discriminator,
    );
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(&digest[..8])
}

/// Causal edge roles, mirroring the pattern step that produced the edge.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeType {
    Precursor,
    Evidence,
    Effect,
    Absence,
    Propagation,
}

impl EdgeType {
    pub const ALL: [EdgeType; 5] = [
        EdgeType::Precursor,
        EdgeType::Evidence,
        EdgeType::Effect,
        EdgeType::Absence,
        EdgeType::Propagation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Precursor => "precursor",
            EdgeType::Evidence => "evidence",
            EdgeType::Effect => "effect",
            EdgeType::Absence => "absence",
            EdgeType::Propagation => "propagation",
        }
    }
}

impl FromStr for EdgeType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| alloc::format!("unknown edge type {s:?}"))
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A typed, confidence-weighted causal link between two stored events.
/// `event_time_delta_ms` is the whole-millisecond gap in *event* time;
/// `construction_wall_ms` is the wall-clock cost of building the edge.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CausalEdge {
    pub from_event_id: String,
    pub to_event_id: String,
    pub pattern_id: String,
    pub edge_type: EdgeType,
    pub confidence: f64,
    pub event_time_delta_ms: i64,
    pub construction_wall_ms: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum ObjectKind {
    Pod,
    Node,
    ConfigMap,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 3] = [ObjectKind::Pod, ObjectKind::Node, ObjectKind::ConfigMap];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::Pod => "Pod",
            ObjectKind::Node => "Node",
            ObjectKind::ConfigMap => "ConfigMap",
        }
    }
}

impl FromStr for ObjectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| alloc::format!("unknown object kind {s:?}"))
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Point-in-time frozen state of a cluster object, keyed by
/// (kind, name, namespace, timestamp).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub object_kind: ObjectKind,
    pub object_name: String,
    pub namespace: String,
    pub timestamp: Timestamp,
    pub state_blob: Value,
}
