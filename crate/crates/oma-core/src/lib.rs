//! Core data model for operational cluster memory: lifecycle events with
//! deterministic identities, a wire codec, declarative failure patterns, and
//! a deterministic cluster simulator. Everything here is pure and
//! `no_std`-compatible (with `alloc`); storage, ingestion, and query live in
//! the companion `oma` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod codec;
pub mod event;
pub mod pattern;
pub mod sim;
pub mod time;

pub use codec::{canonical_json, decode_event, encode_event, DecodeError, Decoded, LINE_SCHEMA};
pub use event::{
    compute_event_id, CausalEdge, CausalEvent, ConfigMapRef, ConsumeMode, EdgeType, EventPayload,
    EventType, NodeSnapshot, ObjectKind, QosClass, Snapshot,
};
pub use pattern::{
    builtin_patterns, classify_edge, EdgeClass, InvalidPattern, PatternDefinition, PatternRole,
    PatternStep, Scope,
};
pub use sim::{
    backoff_schedule, content_hash, run_scenario, stress_scenario, ConfigMapSpec, ConsumerView,
    InvalidScenario, KillRecord, NodeSpec, OracleTrace, PatchSpec, PodSpec, PodTimeline,
    ScenarioOutput, SimScenario, VisiblePodState,
};
pub use time::{normalize_timestamp, MalformedTimestamp, Timestamp};
