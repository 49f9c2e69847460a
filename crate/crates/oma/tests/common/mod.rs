//! Shared integration-test infrastructure: an independent brute-force edge
//! oracle, a seeded random stream generator, store fingerprints, and a
//! timestamp-offset rewriter.
//!
//! The oracle deliberately re-states every linking rule from scratch against
//! hardcoded pattern parameters — it shares no code with the engine beyond
//! the event type itself.

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use oma::engine::Engine;
use oma::ingest::ingest_events;
use oma::store::{EventFilter, Store};
use oma_core::{
    compute_event_id, CausalEvent, ConfigMapRef, ConsumeMode, EventPayload, EventType, Timestamp,
};

pub const MICROS_PER_SECOND: i64 = 1_000_000;

/// A comparable edge identity: construction wall time excluded.
pub type EdgeKey = (String, String, String, String, u64, i64);

/// Expected synthesized-absence identity: (namespace, pod, configmap, µs).
pub type AbsenceKey = (String, String, String, i64);

/// The store's current edge set as comparable keys.
pub fn store_edge_set(store: &Store) -> BTreeSet<EdgeKey> {
    store
        .all_edges()
        .unwrap()
        .into_iter()
        .map(|e| {
            (
                e.from_event_id,
                e.to_event_id,
                e.edge_type.as_str().to_string(),
                e.pattern_id,
                e.confidence.to_bits(),
                e.event_time_delta_ms,
            )
        })
        .collect()
}

/// Every event currently in the store, in time order (synthesized included).
pub fn store_events(store: &Store) -> Vec<CausalEvent> {
    store
        .events_in_window(
            &EventFilter::default(),
            Timestamp::from_micros(i64::MIN),
            Timestamp::from_micros(i64::MAX),
        )
        .unwrap()
}

/// Row-level fingerprint of all durable state: events, edges, snapshots, and
/// the watermark. Two stores with equal fingerprints are interchangeable.
pub fn store_fingerprint(
    store: &Store,
) -> (BTreeSet<String>, BTreeSet<EdgeKey>, BTreeSet<String>, Option<i64>) {
    let events = store_events(store)
        .iter()
        .map(oma_core::canonical_json)
        .collect();
    let snapshots = store
        .all_snapshots()
        .unwrap()
        .iter()
        .map(oma_core::canonical_json)
        .collect();
    let watermark = store.watermark().unwrap().map(|t| t.micros());
    (events, store_edge_set(store), snapshots, watermark)
}

fn delta_ms(from: &CausalEvent, to: &CausalEvent) -> i64 {
    (to.timestamp.micros() - from.timestamp.micros()) / 1000
}

fn within(from: &CausalEvent, to: &CausalEvent, window_s: i64) -> bool {
    let delta = to.timestamp.micros() - from.timestamp.micros();
    delta >= 0 && delta <= window_s * MICROS_PER_SECOND
}

fn same_pod(a: &CausalEvent, b: &CausalEvent) -> bool {
    a.namespace == b.namespace && a.pod_name.is_some() && a.pod_name == b.pod_name
}

fn same_configmap(a: &CausalEvent, b: &CausalEvent) -> bool {
    a.namespace == b.namespace
        && a.configmap_name.is_some()
        && a.configmap_name == b.configmap_name
}

/// Independent O(n²) reconstruction of the full edge set over a finished
/// event list (synthesized absence events included as targets).
pub fn brute_force_edges(events: &[CausalEvent]) -> BTreeSet<EdgeKey> {
    let mut edges = BTreeSet::new();
    let mut push = |from: &CausalEvent, to: &CausalEvent, ty: &str, pat: &str, conf: f64| {
        edges.insert((
            from.event_id.clone(),
            to.event_id.clone(),
            ty.to_string(),
            pat.to_string(),
            conf.to_bits(),
            delta_ms(from, to),
        ));
    };
    for to in events {
        for from in events {
            if from.event_id == to.event_id || from.pattern_id.is_some() {
                continue;
            }
            match to.event_type {
                EventType::OOMKillEvidence if to.pattern_id.is_none() => {
                    if from.event_type == EventType::OOMKill
                        && same_pod(from, to)
                        && within(from, to, 90)
                    {
                        push(from, to, "evidence", "P001", 1.0);
                    }
                }
                EventType::OOMKill if to.pattern_id.is_none() => {
                    if from.event_type == EventType::NodeMemoryPressure
                        && from.node_name.is_some()
                        && from.node_name == to.node_name
                        && within(from, to, 300)
                    {
                        push(from, to, "precursor", "P001", 0.9);
                    }
                }
                EventType::ContainerTerminated if to.pattern_id.is_none() => {
                    if from.event_type == EventType::OOMKill
                        && same_pod(from, to)
                        && within(from, to, 10)
                    {
                        push(from, to, "effect", "P001", 1.0);
                    }
                }
                EventType::KubeletSync if to.pattern_id.is_none() => {
                    if from.event_type == EventType::ConfigMapChanged
                        && same_configmap(from, to)
                        && within(from, to, 90)
                    {
                        push(from, to, "propagation", "P003", 1.0);
                    }
                }
                EventType::PodNotRestarted if to.pattern_id.as_deref() == Some("P002") => {
                    if from.event_type == EventType::ConfigMapChanged
                        && same_configmap(from, to)
                        && to.timestamp.micros() - from.timestamp.micros()
                            == 120 * MICROS_PER_SECOND
                    {
                        push(from, to, "absence", "P002", 1.0);
                    }
                }
                _ => {}
            }
        }
    }
    edges
}

/// Independent reconstruction of which PodNotRestarted events must exist
/// after a sorted full ingest of `sources`.
pub fn brute_force_absences(sources: &[CausalEvent]) -> BTreeSet<AbsenceKey> {
    let max_ts = match sources.iter().map(|e| e.timestamp.micros()).max() {
        Some(t) => t,
        None => return BTreeSet::new(),
    };
    let mut expected = BTreeSet::new();
    for trigger in sources {
        if trigger.event_type != EventType::ConfigMapChanged || trigger.pattern_id.is_some() {
            continue;
        }
        let Some(cm) = &trigger.configmap_name else { continue };
        let cutoff = trigger.timestamp.micros() + 120 * MICROS_PER_SECOND;
        if max_ts < cutoff {
            continue;
        }
        // Pods with a configmap-reference observation at or before the
        // cutoff; PodDeleted clears the refs.
        let mut pods: BTreeSet<&str> = BTreeSet::new();
        for obs in sources {
            if obs.namespace != trigger.namespace || obs.timestamp.micros() > cutoff {
                continue;
            }
            let Some(pod) = &obs.pod_name else { continue };
            if obs.payload.configmap_refs.is_some() || obs.event_type == EventType::PodDeleted {
                pods.insert(pod);
            }
        }
        for pod in pods {
            let latest_refs = sources
                .iter()
                .filter(|obs| {
                    obs.namespace == trigger.namespace
                        && obs.pod_name.as_deref() == Some(pod)
                        && obs.timestamp.micros() <= cutoff
                        && (obs.payload.configmap_refs.is_some()
                            || obs.event_type == EventType::PodDeleted)
                })
                .max_by_key(|obs| obs.timestamp.micros())
                .and_then(|obs| {
                    if obs.event_type == EventType::PodDeleted {
                        None
                    } else {
                        obs.payload.configmap_refs.clone()
                    }
                })
                .unwrap_or_default();
            let consumes_env = latest_refs
                .iter()
                .any(|r| &r.name == cm && r.mode == ConsumeMode::Env);
            if !consumes_env {
                continue;
            }
            let restarted = sources.iter().any(|ev| {
                ev.event_type == EventType::ContainerStarted
                    && ev.namespace == trigger.namespace
                    && ev.pod_name.as_deref() == Some(pod)
                    && ev.timestamp.micros() > trigger.timestamp.micros()
                    && ev.timestamp.micros() <= cutoff
            });
            if !restarted {
                expected.insert((
                    trigger.namespace.clone(),
                    pod.to_string(),
                    cm.clone(),
                    cutoff,
                ));
            }
        }
    }
    expected
}

/// The store's synthesized absence events as comparable keys.
pub fn store_absence_set(store: &Store) -> BTreeSet<AbsenceKey> {
    store_events(store)
        .into_iter()
        .filter(|e| e.pattern_id.is_some())
        .map(|e| {
            assert_eq!(e.event_type, EventType::PodNotRestarted);
            (
                e.namespace.clone(),
                e.pod_name.clone().expect("synthesized events are pod-scoped"),
                e.configmap_name.clone().expect("synthesized events carry the configmap"),
                e.timestamp.micros(),
            )
        })
        .collect()
}

const FUZZ_PODS: [&str; 5] = ["pod-0", "pod-1", "pod-2", "pod-3", "pod-4"];
const FUZZ_NODES: [&str; 2] = ["node-0", "node-1"];
const FUZZ_CONFIGMAPS: [&str; 3] = ["cm-0", "cm-1", "cm-2"];

fn random_refs(rng: &mut ChaCha8Rng) -> Vec<ConfigMapRef> {
    let mut refs = Vec::new();
    for name in FUZZ_CONFIGMAPS {
        if rng.gen_bool(0.4) {
            let mode = if rng.gen_bool(0.5) { ConsumeMode::Env } else { ConsumeMode::Volume };
            refs.push(ConfigMapRef { name: name.to_string(), mode });
        }
    }
    refs
}

/// Generate a sorted, strictly increasing-timestamp event stream exercising
/// every linking rule: kills, evidence, terminations, pressure, configmap
/// changes, restarts with reference declarations, kubelet syncs, deletions.
pub fn random_stream(seed: u64, max_events: usize) -> Vec<CausalEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(max_events / 2..=max_events).max(1);
    let mut ts = Timestamp::parse("2026-01-15T10:00:00Z").unwrap().micros();
    let namespace = "fuzz";
    let mut events = Vec::with_capacity(count);
    for _ in 0..count {
        ts += rng.gen_range(1..=5 * MICROS_PER_SECOND);
        let timestamp = Timestamp::from_micros(ts);
        let pod = FUZZ_PODS[rng.gen_range(0..FUZZ_PODS.len())].to_string();
        let node = FUZZ_NODES[rng.gen_range(0..FUZZ_NODES.len())].to_string();
        let cm = FUZZ_CONFIGMAPS[rng.gen_range(0..FUZZ_CONFIGMAPS.len())].to_string();
        let roll = rng.gen_range(0u32..100);
        let mut event = CausalEvent {
            event_id: String::new(),
            timestamp,
            event_type: EventType::OOMKill,
            pattern_id: None,
            namespace: namespace.to_string(),
            pod_name: None,
            container_name: None,
            node_name: None,
            configmap_name: None,
            discriminator: 0,
            payload: EventPayload::default(),
        };
        match roll {
            0..=17 => {
                event.event_type = EventType::OOMKill;
                event.pod_name = Some(pod);
                event.container_name = Some("app".to_string());
                event.node_name = Some(node);
                event.payload.exit_code = Some(137);
                event.payload.reason = Some("OOMKilled".to_string());
            }
            18..=35 => {
                event.event_type = EventType::OOMKillEvidence;
                event.pod_name = Some(pod);
                event.container_name = Some("app".to_string());
                if rng.gen_bool(0.3) {
                    event.payload.configmap_refs = Some(random_refs(&mut rng));
                }
            }
            36..=45 => {
                event.event_type = EventType::ContainerTerminated;
                event.pod_name = Some(pod);
                event.container_name = Some("app".to_string());
                event.payload.exit_code = Some(137);
            }
            46..=55 => {
                event.event_type = EventType::NodeMemoryPressure;
                event.namespace = String::new();
                event.node_name = Some(node);
            }
            56..=65 => {
                event.event_type = EventType::ConfigMapChanged;
                event.configmap_name = Some(cm);
                event.payload.content_hash_before = Some(format!("{:016x}", rng.gen::<u64>()));
                event.payload.content_hash_after = Some(format!("{:016x}", rng.gen::<u64>()));
                event.payload.changed_keys = Some(vec!["key".to_string()]);
            }
            66..=82 => {
                event.event_type = EventType::ContainerStarted;
                event.pod_name = Some(pod);
                event.container_name = Some("app".to_string());
                event.payload.restart_count = Some(rng.gen_range(0..5));
                event.payload.configmap_refs = Some(random_refs(&mut rng));
            }
            83..=93 => {
                event.event_type = EventType::KubeletSync;
                event.pod_name = Some(pod);
                event.configmap_name = Some(cm);
                event.payload.propagation_latency_ms = Some(rng.gen_range(0..95_000));
            }
            _ => {
                event.event_type = EventType::PodDeleted;
                event.pod_name = Some(pod);
            }
        }
        event.event_id = compute_event_id(
            event.event_type,
            &event.namespace,
            event.pod_name.as_deref(),
            event.container_name.as_deref(),
            event.configmap_name.as_deref(),
            event.timestamp,
            event.discriminator,
        );
        events.push(event);
    }
    events
}

/// Ingest a slice of events into a fresh in-memory store.
pub fn ingest_into_memory(events: &[CausalEvent]) -> (Store, oma::ingest::IngestReport) {
    let store = Store::open_in_memory().unwrap();
    let engine = Engine::load(&store).unwrap();
    let report = ingest_events(&store, &engine, events, 97).unwrap();
    (store, report)
}

/// Rewrite every line's `timestamp` into a randomly chosen UTC offset
/// (`-05:00`, `+05:30`, or `Z`) without moving the instant it denotes.
pub fn rewrite_timestamp_offsets(log: &str, seed: u64) -> String {
    use chrono::{DateTime, FixedOffset, SecondsFormat};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets = [
        FixedOffset::west_opt(5 * 3600).unwrap(),
        FixedOffset::east_opt(5 * 3600 + 1800).unwrap(),
    ];
    let mut out = String::new();
    for line in log.lines() {
        let mut value: serde_json::Value = serde_json::from_str(line).unwrap();
        let raw = value["timestamp"].as_str().unwrap().to_string();
        let parsed = DateTime::parse_from_rfc3339(&raw).unwrap();
        let choice = rng.gen_range(0..3);
        let rewritten = if choice == 2 {
            parsed
                .with_timezone(&chrono::Utc)
                .to_rfc3339_opts(SecondsFormat::AutoSi, true)
        } else {
            parsed
                .with_timezone(&offsets[choice])
                .to_rfc3339_opts(SecondsFormat::AutoSi, false)
        };
        value["timestamp"] = serde_json::Value::String(rewritten);
        out.push_str(&serde_json::to_string(&value).unwrap());
        out.push('\n');
    }
    out
}

/// Absolute path of a committed fixture log.
pub fn fixture_log_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join("logs")
        .join(format!("{name}.jsonl"))
}
