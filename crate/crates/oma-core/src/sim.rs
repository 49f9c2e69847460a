//! Deterministic cluster-lifecycle simulator.
//!
//! A scenario declares one node, ConfigMaps, pods, and ConfigMap patches;
//! running it produces a chronologically ordered event log plus an oracle of
//! what a present-tense observer (kubectl-style) could still see at any
//! instant. The contrast is the point: a container status retains at most one
//! termination record (each new termination destroys the previous one, and
//! deletion destroys that too), while the emitted log preserves every kill.
//!
//! Determinism: the only randomness is the capture delay applied to
//! synchronously observed events (`OOMKillEvidence`, `ContainerTerminated`).
//! Delays are drawn from a ChaCha8 stream seeded by the scenario, in pod
//! declaration order, kill order within a pod, evidence draw before
//! terminated draw — so identical scenarios yield byte-identical logs.
//!
//! Observation model for kills, mirroring how kubelet status updates surface
//! the last-termination record:
//! 1. a capture shortly after the kill (kill time + capture delay);
//! 2. a re-observation at each restart, reporting the kill the restart
//!    recovers from (delta = the backoff interval);
//! 3. optional periodic status resyncs, each reporting the latest kill so far.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::event::{
    CausalEvent, ConfigMapRef, ConsumeMode, EventPayload, EventType, NodeSnapshot, QosClass,
};
use crate::time::Timestamp;

/// Scenario clock origin used when a scenario does not set one.
pub const DEFAULT_START_TIME: &str = "2026-01-15T10:00:00Z";

fn default_schema() -> u32 {
    1
}

fn default_start_time() -> Timestamp {
    Timestamp::parse(DEFAULT_START_TIME).expect("default start time is well-formed")
}

fn default_capture_delay() -> [f64; 2] {
    [0.05, 3.0]
}

fn default_sync_delay() -> u64 {
    30
}

fn default_container_name() -> String {
    "app".to_string()
}

fn default_pressure_threshold() -> f64 {
    0.8
}

/// The scenario's single worker node. It reports memory pressure whenever the
/// summed allocations of running containers exceed the threshold fraction of
/// allocatable memory.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub allocatable_memory_bytes: u64,
    #[serde(default = "default_pressure_threshold")]
    pub pressure_threshold_fraction: f64,
}

/// A simulated ConfigMap with its initial data.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ConfigMapSpec {
    pub name: String,
    pub data: BTreeMap<String, String>,
}

/// One pod. Its workload tries to use `allocation_bytes`; if that exceeds
/// `memory_limit_bytes` the container is OOM-killed at `first_crash_at_s` and
/// after the same run time in every subsequent cycle, restarting under
/// exponential backoff. Otherwise the pod runs quietly for the whole horizon.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PodSpec {
    pub name: String,
    #[serde(default = "default_container_name")]
    pub container_name: String,
    #[serde(default)]
    pub memory_limit_bytes: u64,
    #[serde(default)]
    pub memory_request_bytes: u64,
    #[serde(default)]
    pub cpu_limit_millicores: u32,
    #[serde(default)]
    pub cpu_request_millicores: u32,
    /// Memory the workload actually tries to use.
    #[serde(default)]
    pub allocation_bytes: u64,
    /// Seconds after scenario start at which the pod's container first starts.
    #[serde(default)]
    pub start_offset_s: u64,
    /// Offset of the first OOM kill; required when allocation exceeds the
    /// limit. Later kills repeat after the same per-run delay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_crash_at_s: Option<u64>,
    /// Offset at which the pod object is deleted, destroying its live state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delete_at_s: Option<u64>,
    /// Period of kubelet status resyncs that re-report the latest termination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status_resync_period_s: Option<u64>,
    /// Also emit a ContainerTerminated event for each kill.
    #[serde(default)]
    pub emit_terminated: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub configmap_refs: Vec<ConfigMapRef>,
}

impl PodSpec {
    /// Whether the workload exceeds its memory limit (and therefore crashes).
    pub fn crashes(&self) -> bool {
        self.memory_limit_bytes > 0 && self.allocation_bytes > self.memory_limit_bytes
    }

    /// QoS class derived from limits and requests, Kubernetes-style.
    pub fn qos_class(&self) -> QosClass {
        let any = self.memory_limit_bytes > 0
            || self.memory_request_bytes > 0
            || self.cpu_limit_millicores > 0
            || self.cpu_request_millicores > 0;
        if !any {
            QosClass::BestEffort
        } else if self.memory_limit_bytes > 0
            && self.cpu_limit_millicores > 0
            && self.memory_limit_bytes == self.memory_request_bytes
            && self.cpu_limit_millicores == self.cpu_request_millicores
        {
            QosClass::Guaranteed
        } else {
            QosClass::Burstable
        }
    }
}

/// An in-place ConfigMap edit applied at an offset.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PatchSpec {
    pub name: String,
    pub at_s: u64,
    pub set: BTreeMap<String, String>,
}

/// A complete simulation input. Serializable so scenarios can live in files.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SimScenario {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub namespace: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_start_time")]
    pub start_time: Timestamp,
    pub duration_s: u64,
    /// Half-open range (milliseconds) for synchronous capture delays; must
    /// stay under 100 ms so synchronous captures classify as intra-cycle.
    #[serde(default = "default_capture_delay")]
    pub capture_delay_ms_range: [f64; 2],
    /// Delay between a ConfigMap change and kubelet projecting it into
    /// volume-mode consumers.
    #[serde(default = "default_sync_delay")]
    pub kubelet_sync_delay_s: u64,
    pub node: NodeSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub configmaps: Vec<ConfigMapSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pods: Vec<PodSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub configmap_patches: Vec<PatchSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidScenario {
    pub detail: String,
}

impl fmt::Display for InvalidScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scenario: {}", self.detail)
    }
}

impl core::error::Error for InvalidScenario {}

fn invalid(detail: alloc::string::String) -> InvalidScenario {
    InvalidScenario { detail }
}

impl SimScenario {
    pub fn validate(&self) -> Result<(), InvalidScenario> {
        if self.schema != 1 {
            return Err(invalid(alloc::format!("unsupported schema {}", self.schema)));
        }
        if self.name.is_empty() {
            return Err(invalid("scenario name must be non-empty".into()));
        }
        if self.namespace.is_empty() {
            return Err(invalid("namespace must be non-empty".into()));
        }
        if self.duration_s == 0 {
            return Err(invalid("duration_s must be positive".into()));
        }
        let [lo, hi] = self.capture_delay_ms_range;
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi || hi >= 100.0 {
            return Err(invalid(alloc::format!(
                "capture_delay_ms_range [{lo}, {hi}] must satisfy 0 <= lo <= hi < 100"
            )));
        }
        if self.node.name.is_empty() {
            return Err(invalid("node name must be non-empty".into()));
        }
        if self.node.allocatable_memory_bytes == 0 {
            return Err(invalid("node allocatable_memory_bytes must be positive".into()));
        }
        let thr = self.node.pressure_threshold_fraction;
        if !thr.is_finite() || thr <= 0.0 || thr > 1.0 {
            return Err(invalid(alloc::format!(
                "pressure_threshold_fraction {thr} must be in (0, 1]"
            )));
        }
        let mut cm_names = BTreeMap::new();
        for cm in &self.configmaps {
            if cm.name.is_empty() {
                return Err(invalid("configmap name must be non-empty".into()));
            }
            if cm_names.insert(cm.name.as_str(), ()).is_some() {
                return Err(invalid(alloc::format!("duplicate configmap {:?}", cm.name)));
            }
        }
        let mut pod_names = BTreeMap::new();
        for p in &self.pods {
            let ctx = |d: alloc::string::String| invalid(alloc::format!("pod {:?}: {d}", p.name));
            if p.name.is_empty() {
                return Err(invalid("pod name must be non-empty".into()));
            }
            if pod_names.insert(p.name.as_str(), ()).is_some() {
                return Err(invalid(alloc::format!("duplicate pod {:?}", p.name)));
            }
            if p.container_name.is_empty() {
                return Err(ctx("container_name must be non-empty".into()));
            }
            if p.start_offset_s >= self.duration_s {
                return Err(ctx("start_offset_s must fall inside the horizon".into()));
            }
            if p.crashes() {
                match p.first_crash_at_s {
                    None => {
                        return Err(ctx(
                            "allocation exceeds the memory limit; first_crash_at_s required"
                                .into(),
                        ));
                    }
                    Some(t) if t <= p.start_offset_s => {
                        return Err(ctx("first_crash_at_s must come after start_offset_s".into()));
                    }
                    Some(_) => {}
                }
            } else if p.first_crash_at_s.is_some() {
                return Err(ctx(
                    "first_crash_at_s set but allocation fits within the memory limit".into(),
                ));
            }
            if let Some(d) = p.delete_at_s {
                if d <= p.start_offset_s {
                    return Err(ctx("delete_at_s must come after start_offset_s".into()));
                }
            }
            if p.status_resync_period_s == Some(0) {
                return Err(ctx("status_resync_period_s must be positive".into()));
            }
            if p.memory_request_bytes > p.memory_limit_bytes && p.memory_limit_bytes > 0 {
                return Err(ctx("memory request exceeds limit".into()));
            }
            if p.cpu_request_millicores > p.cpu_limit_millicores && p.cpu_limit_millicores > 0 {
                return Err(ctx("cpu request exceeds limit".into()));
            }
            let mut seen_refs = BTreeMap::new();
            for r in &p.configmap_refs {
                if !cm_names.contains_key(r.name.as_str()) {
                    return Err(ctx(alloc::format!("unknown configmap {:?}", r.name)));
                }
                if seen_refs.insert((r.name.as_str(), r.mode), ()).is_some() {
                    return Err(ctx(alloc::format!("duplicate ref to {:?}", r.name)));
                }
            }
        }
        for patch in &self.configmap_patches {
            if !cm_names.contains_key(patch.name.as_str()) {
                return Err(invalid(alloc::format!(
                    "patch targets unknown configmap {:?}",
                    patch.name
                )));
            }
            if patch.set.is_empty() {
                return Err(invalid("patch set must be non-empty".into()));
            }
        }
        Ok(())
    }
}

/// Restart backoff in seconds before restart number `restart_count`
/// (1-based): 20 s doubling per restart, capped at 300 s.
pub fn backoff_schedule(restart_count: u32) -> u64 {
    if restart_count == 0 {
        0
    } else {
        (10u64 << restart_count.min(6)).min(300)
    }
}

/// First 16 hex chars of SHA-256 over a ConfigMap's serialized data.
pub fn content_hash(data: &BTreeMap<String, String>) -> String {
    let json = serde_json::to_string(data).expect("string maps always serialize");
    let digest = Sha256::digest(json.as_bytes());
    hex::encode(&digest[..8])
}

/// One OOM kill as it actually happened.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct KillRecord {
    pub pod_name: String,
    pub container_name: String,
    pub exit_code: i32,
    pub reason: String,
    pub started_at: Timestamp,
    pub finished_at: Timestamp,
    /// 1-based index of this kill within its pod.
    pub restart_count_after: u32,
}

/// Everything that ever happened to one pod (ground truth, not the live view).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PodTimeline {
    pub pod_name: String,
    pub container_name: String,
    pub created_at: Timestamp,
    /// Initial start plus every completed restart, ascending.
    pub starts: Vec<Timestamp>,
    pub kills: Vec<KillRecord>,
    /// Deletion instant, when it falls inside the horizon.
    pub deleted_at: Option<Timestamp>,
}

/// What a present-tense observer sees for one pod at one instant.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct VisiblePodState {
    pub phase: String,
    pub container_running: bool,
    /// Completed restarts so far.
    pub restart_count: u32,
    /// The single termination record the container status retains.
    pub last_termination: Option<KillRecord>,
}

/// A (pod, ConfigMap) consumption view at the horizon: the content version
/// the workload actually sees vs. the current content.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ConsumerView {
    pub pod_name: String,
    pub configmap_name: String,
    pub mode: ConsumeMode,
    pub visible_hash: String,
    pub current_hash: String,
}

impl ConsumerView {
    pub fn is_stale(&self) -> bool {
        self.visible_hash != self.current_hash
    }
}

/// Ground truth paired with the describe oracle: full history per pod, plus
/// horizon-time consumption views.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct OracleTrace {
    pub horizon: Timestamp,
    /// Every kill that occurred, in time order.
    pub kills: Vec<KillRecord>,
    pub pods: BTreeMap<String, PodTimeline>,
    pub consumers: Vec<ConsumerView>,
}

impl OracleTrace {
    /// The state a native present-tense tool would report for `pod_name` at
    /// `t`: at most one termination record; `None` (not found) before the pod
    /// exists and forever after deletion.
    pub fn describe(&self, pod_name: &str, t: Timestamp) -> Option<VisiblePodState> {
        let pod = self.pods.get(pod_name)?;
        if t < pod.created_at {
            return None;
        }
        if let Some(deleted) = pod.deleted_at {
            if t >= deleted {
                return None;
            }
        }
        let last_start =
            pod.starts.iter().rev().find(|s| **s <= t).copied().unwrap_or(pod.created_at);
        let last_kill = pod.kills.iter().rev().find(|k| k.finished_at <= t);
        let running = match last_kill {
            Some(kill) => last_start > kill.finished_at,
            None => true,
        };
        Some(VisiblePodState {
            phase: if running { "Running" } else { "Failed" }.to_string(),
            container_running: running,
            restart_count: pod.starts.iter().filter(|s| **s <= t).count().saturating_sub(1)
                as u32,
            last_termination: last_kill.cloned(),
        })
    }

    /// Terminations still recoverable from live state at the horizon
    /// (at most one per pod).
    pub fn recoverable_terminations(&self) -> usize {
        self.pods
            .keys()
            .filter_map(|p| self.describe(p, self.horizon))
            .filter(|v| v.last_termination.is_some())
            .count()
    }

    /// Kills that happened but left no trace in live state at the horizon.
    pub fn unrecoverable_kills(&self) -> usize {
        self.kills.len() - self.recoverable_terminations()
    }
}

/// A finished run: the ordered event log plus ground truth.
#[derive(Clone, PartialEq, Debug)]
pub struct ScenarioOutput {
    pub events: Vec<CausalEvent>,
    pub oracle: OracleTrace,
}

struct CmChange {
    at: Timestamp,
    hash_before: String,
    hash_after: String,
    changed_keys: Vec<String>,
}

struct CmTimeline {
    initial_hash: String,
    changes: Vec<CmChange>,
}

impl CmTimeline {
    fn hash_at(&self, t: Timestamp) -> &str {
        self.changes
            .iter()
            .rev()
            .find(|c| c.at <= t)
            .map(|c| c.hash_after.as_str())
            .unwrap_or(self.initial_hash.as_str())
    }
}

fn build_cm_timelines(sc: &SimScenario) -> Result<BTreeMap<String, CmTimeline>, InvalidScenario> {
    let mut timelines = BTreeMap::new();
    for cm in &sc.configmaps {
        let mut data = cm.data.clone();
        let mut hash = content_hash(&data);
        let initial_hash = hash.clone();
        let mut changes = Vec::new();
        let mut patches: Vec<&PatchSpec> =
            sc.configmap_patches.iter().filter(|p| p.name == cm.name).collect();
        patches.sort_by_key(|p| p.at_s);
        for patch in patches {
            let mut changed_keys: Vec<String> = Vec::new();
            for (k, v) in &patch.set {
                if data.get(k) != Some(v) {
                    changed_keys.push(k.clone());
                }
                data.insert(k.clone(), v.clone());
            }
            let new_hash = content_hash(&data);
            if changed_keys.is_empty() || new_hash == hash {
                return Err(invalid(alloc::format!(
                    "patch of {:?} at {}s does not change its content",
                    cm.name,
                    patch.at_s
                )));
            }
            changes.push(CmChange {
                at: sc.start_time.add_seconds(patch.at_s as i64),
                hash_before: hash.clone(),
                hash_after: new_hash.clone(),
                changed_keys,
            });
            hash = new_hash;
        }
        timelines.insert(cm.name.clone(), CmTimeline { initial_hash, changes });
    }
    Ok(timelines)
}

fn draw_delay_micros(rng: &mut ChaCha8Rng, range: [f64; 2]) -> i64 {
    let u: f64 = rng.gen();
    let ms = range[0] + u * (range[1] - range[0]);
    // Round half up; delays are validated non-negative.
    (ms * 1000.0 + 0.5) as i64
}

/// Precomputed lifecycle instants for one pod.
struct PodPlan<'a> {
    spec: &'a PodSpec,
    created_at: Timestamp,
    starts: Vec<Timestamp>,
    kills: Vec<KillRecord>,
    deleted_at: Option<Timestamp>,
    /// True when the pod ends the horizon waiting out a backoff.
    ends_in_backoff: bool,
}

impl PodPlan<'_> {
    fn running_intervals(&self, horizon: Timestamp) -> Vec<(Timestamp, Timestamp)> {
        let end_of_life = self.deleted_at.unwrap_or(horizon).min(horizon);
        let mut intervals = Vec::new();
        for (i, start) in self.starts.iter().enumerate() {
            let stop = self
                .kills
                .get(i)
                .map(|k| k.finished_at)
                .unwrap_or(end_of_life)
                .min(end_of_life);
            if *start < stop {
                intervals.push((*start, stop));
            }
        }
        intervals
    }
}

fn plan_pod<'a>(
    sc: &SimScenario,
    pod: &'a PodSpec,
    end: Timestamp,
) -> PodPlan<'a> {
    let t0 = sc.start_time;
    let s0 = t0.add_seconds(pod.start_offset_s as i64);
    let delete_at = pod.delete_at_s.map(|d| t0.add_seconds(d as i64)).filter(|d| *d <= end);
    let allowed = |t: Timestamp| t <= end && delete_at.map_or(true, |d| t < d);
    let mut starts = alloc::vec![s0];
    let mut kills = Vec::new();
    let mut ends_in_backoff = false;
    if pod.crashes() {
        let crash_delay = pod.first_crash_at_s.expect("validated") - pod.start_offset_s;
        let mut run_start = s0;
        loop {
            let kill_at = run_start.add_seconds(crash_delay as i64);
            if !allowed(kill_at) {
                break;
            }
            let n = kills.len() as u32 + 1;
            kills.push(KillRecord {
                pod_name: pod.name.clone(),
                container_name: pod.container_name.clone(),
                exit_code: 137,
                reason: "OOMKilled".to_string(),
                started_at: run_start,
                finished_at: kill_at,
                restart_count_after: n,
            });
            let restart_at = kill_at.add_seconds(backoff_schedule(n) as i64);
            if !allowed(restart_at) {
                ends_in_backoff = true;
                break;
            }
            starts.push(restart_at);
            run_start = restart_at;
        }
    }
    PodPlan { spec: pod, created_at: s0, starts, kills, deleted_at: delete_at, ends_in_backoff }
}

struct EventBuilder {
    namespace: String,
    node_name: String,
    events: Vec<CausalEvent>,
}

impl EventBuilder {
    fn push(
        &mut self,
        ts: Timestamp,
        event_type: EventType,
        pod: Option<&PodSpec>,
        configmap_name: Option<&str>,
        payload: EventPayload,
    ) {
        self.events.push(CausalEvent {
            event_id: String::new(),
            timestamp: ts,
            event_type,
            pattern_id: None,
            namespace: if event_type == EventType::NodeMemoryPressure {
                // Nodes are cluster-scoped.
                String::new()
            } else {
                self.namespace.clone()
            },
            pod_name: pod.map(|p| p.name.clone()),
            container_name: pod.map(|p| p.container_name.clone()),
            node_name: Some(self.node_name.clone()),
            configmap_name: configmap_name.map(|s| s.to_string()),
            discriminator: 0,
            payload,
        });
    }
}

fn pod_resource_payload(pod: &PodSpec) -> EventPayload {
    EventPayload {
        memory_limit_bytes: (pod.memory_limit_bytes > 0).then_some(pod.memory_limit_bytes),
        memory_request_bytes: (pod.memory_request_bytes > 0).then_some(pod.memory_request_bytes),
        cpu_limit_millicores: (pod.cpu_limit_millicores > 0).then_some(pod.cpu_limit_millicores),
        cpu_request_millicores: (pod.cpu_request_millicores > 0)
            .then_some(pod.cpu_request_millicores),
        qos_class: Some(pod.qos_class()),
        configmap_refs: (!pod.configmap_refs.is_empty()).then(|| pod.configmap_refs.clone()),
        ..EventPayload::default()
    }
}

/// Run a scenario, producing the ordered log and the oracle.
pub fn run_scenario(sc: &SimScenario) -> Result<ScenarioOutput, InvalidScenario> {
    sc.validate()?;
    let t0 = sc.start_time;
    let end = t0.add_seconds(sc.duration_s as i64);
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let cm_timelines = build_cm_timelines(sc)?;
    let mut b = EventBuilder {
        namespace: sc.namespace.clone(),
        node_name: sc.node.name.clone(),
        events: Vec::new(),
    };

    let plans: Vec<PodPlan> = sc.pods.iter().map(|p| plan_pod(sc, p, end)).collect();

    // Node pressure: walk allocation deltas at run boundaries; emit
    // NodeMemoryPressure at each upward threshold crossing and keep the
    // flip history for snapshot lookups.
    let threshold =
        sc.node.pressure_threshold_fraction * sc.node.allocatable_memory_bytes as f64;
    let mut deltas: Vec<(i64, i64)> = Vec::new();
    for plan in &plans {
        let alloc = plan.spec.allocation_bytes as i64;
        if alloc == 0 {
            continue;
        }
        for (start, stop) in plan.running_intervals(end) {
            deltas.push((start.micros(), alloc));
            deltas.push((stop.micros(), -alloc));
        }
    }
    deltas.sort_by_key(|(t, _)| *t);
    let mut pressure_flips: Vec<(i64, bool)> = Vec::new();
    {
        let mut sum: i64 = 0;
        let mut above = false;
        let mut i = 0;
        while i < deltas.len() {
            let t = deltas[i].0;
            while i < deltas.len() && deltas[i].0 == t {
                sum += deltas[i].1;
                i += 1;
            }
            let now_above = sum as f64 > threshold;
            if now_above != above {
                pressure_flips.push((t, now_above));
                if now_above {
                    let at = Timestamp::from_micros(t);
                    if at <= end {
                        let payload = EventPayload {
                            node_snapshot: Some(NodeSnapshot {
                                allocatable_memory_bytes: sc.node.allocatable_memory_bytes,
                                memory_pressure: true,
                                node_name: sc.node.name.clone(),
                            }),
                            ..EventPayload::default()
                        };
                        b.push(at, EventType::NodeMemoryPressure, None, None, payload);
                    }
                }
                above = now_above;
            }
        }
    }
    let pressure_at = |t: Timestamp| {
        pressure_flips
            .iter()
            .rev()
            .find(|(at, _)| *at <= t.micros())
            .map(|(_, above)| *above)
            .unwrap_or(false)
    };
    let node_snapshot_at = |t: Timestamp| NodeSnapshot {
        allocatable_memory_bytes: sc.node.allocatable_memory_bytes,
        memory_pressure: pressure_at(t),
        node_name: sc.node.name.clone(),
    };

    // ConfigMap changes.
    for cm in &sc.configmaps {
        let timeline = &cm_timelines[&cm.name];
        for change in &timeline.changes {
            if change.at > end {
                continue;
            }
            let payload = EventPayload {
                content_hash_before: Some(change.hash_before.clone()),
                content_hash_after: Some(change.hash_after.clone()),
                changed_keys: Some(change.changed_keys.clone()),
                ..EventPayload::default()
            };
            b.push(change.at, EventType::ConfigMapChanged, None, Some(&cm.name), payload);
        }
    }

    // Kubelet volume syncs: each change reaches each already-running
    // volume-mode consumer one sync delay later.
    for cm in &sc.configmaps {
        let timeline = &cm_timelines[&cm.name];
        for change in &timeline.changes {
            for plan in &plans {
                let pod = plan.spec;
                let consumes = pod
                    .configmap_refs
                    .iter()
                    .any(|r| r.name == cm.name && r.mode == ConsumeMode::Volume);
                if !consumes || plan.created_at > change.at {
                    continue;
                }
                let sync_at = change.at.add_seconds(sc.kubelet_sync_delay_s as i64);
                let gone = plan.deleted_at.map(|d| d <= sync_at).unwrap_or(false);
                if sync_at > end || gone {
                    continue;
                }
                let payload = EventPayload {
                    propagation_latency_ms: Some(sc.kubelet_sync_delay_s * 1000),
                    content_hash_after: Some(change.hash_after.clone()),
                    ..EventPayload::default()
                };
                b.push(sync_at, EventType::KubeletSync, Some(pod), Some(&cm.name), payload);
            }
        }
    }

    // Pod lifecycle events. Capture delays are drawn here, in pod declaration
    // order and kill order, so the stream is reproducible.
    for plan in &plans {
        let pod = plan.spec;
        let allowed =
            |t: Timestamp| t <= end && plan.deleted_at.map_or(true, |d| t < d);
        let started_payload = |start: Timestamp, restarts: u32| EventPayload {
            started_at: Some(start),
            restart_count: Some(restarts),
            ..pod_resource_payload(pod)
        };
        for (i, start) in plan.starts.iter().enumerate() {
            b.push(
                *start,
                EventType::ContainerStarted,
                Some(pod),
                None,
                started_payload(*start, i as u32),
            );
        }
        for kill in &plan.kills {
            let n = kill.restart_count_after;
            let kill_payload = EventPayload {
                exit_code: Some(137),
                reason: Some("OOMKilled".to_string()),
                started_at: Some(kill.started_at),
                finished_at: Some(kill.finished_at),
                restart_count: Some(n - 1),
                memory_limit_bytes: Some(pod.memory_limit_bytes),
                qos_class: Some(pod.qos_class()),
                ..EventPayload::default()
            };
            b.push(kill.finished_at, EventType::OOMKill, Some(pod), None, kill_payload);

            let evidence_payload = |at: Timestamp| EventPayload {
                exit_code: Some(137),
                reason: Some("OOMKilled".to_string()),
                started_at: Some(kill.started_at),
                finished_at: Some(kill.finished_at),
                restart_count: Some(n),
                node_snapshot: Some(node_snapshot_at(at)),
                ..pod_resource_payload(pod)
            };
            let capture_at = kill
                .finished_at
                .add_micros(draw_delay_micros(&mut rng, sc.capture_delay_ms_range));
            if allowed(capture_at) {
                b.push(
                    capture_at,
                    EventType::OOMKillEvidence,
                    Some(pod),
                    None,
                    evidence_payload(capture_at),
                );
            }
            if pod.emit_terminated {
                let term_at = kill
                    .finished_at
                    .add_micros(draw_delay_micros(&mut rng, sc.capture_delay_ms_range));
                if allowed(term_at) {
                    let payload = EventPayload {
                        exit_code: Some(137),
                        reason: Some("OOMKilled".to_string()),
                        started_at: Some(kill.started_at),
                        finished_at: Some(kill.finished_at),
                        restart_count: Some(n - 1),
                        ..EventPayload::default()
                    };
                    b.push(term_at, EventType::ContainerTerminated, Some(pod), None, payload);
                }
            }
            // The restart's status update re-reports the termination it
            // recovers from.
            if let Some(restart_at) = plan.starts.get(n as usize) {
                b.push(
                    *restart_at,
                    EventType::OOMKillEvidence,
                    Some(pod),
                    None,
                    evidence_payload(*restart_at),
                );
            }
        }
        if let Some(period) = pod.status_resync_period_s {
            for j in 1.. {
                let tick = plan.created_at.add_seconds((j * period) as i64);
                if !allowed(tick) {
                    break;
                }
                let latest = plan.kills.iter().rev().find(|k| k.finished_at <= tick);
                if let Some(kill) = latest {
                    let payload = EventPayload {
                        exit_code: Some(kill.exit_code),
                        reason: Some(kill.reason.clone()),
                        started_at: Some(kill.started_at),
                        finished_at: Some(kill.finished_at),
                        restart_count: Some(kill.restart_count_after),
                        node_snapshot: Some(node_snapshot_at(tick)),
                        ..pod_resource_payload(pod)
                    };
                    b.push(tick, EventType::OOMKillEvidence, Some(pod), None, payload);
                }
            }
        }
        if let Some(deleted_at) = plan.deleted_at {
            let phase = if plan.ends_in_backoff
                && plan.kills.last().map(|k| k.finished_at < deleted_at).unwrap_or(false)
            {
                "Failed"
            } else {
                "Running"
            };
            let mut state = serde_json::Map::new();
            state.insert("phase".into(), Value::from(phase));
            state.insert("container_name".into(), Value::from(pod.container_name.clone()));
            state.insert("node_name".into(), Value::from(sc.node.name.clone()));
            state.insert("restart_count".into(), Value::from(plan.starts.len() as u32 - 1));
            state.insert(
                "qos_class".into(),
                serde_json::to_value(pod.qos_class()).expect("enum serializes"),
            );
            if pod.memory_limit_bytes > 0 {
                state.insert("memory_limit_bytes".into(), Value::from(pod.memory_limit_bytes));
            }
            if pod.memory_request_bytes > 0 {
                state.insert("memory_request_bytes".into(), Value::from(pod.memory_request_bytes));
            }
            if pod.cpu_limit_millicores > 0 {
                state.insert("cpu_limit_millicores".into(), Value::from(pod.cpu_limit_millicores));
            }
            if pod.cpu_request_millicores > 0 {
                state.insert(
                    "cpu_request_millicores".into(),
                    Value::from(pod.cpu_request_millicores),
                );
            }
            if !pod.configmap_refs.is_empty() {
                state.insert(
                    "configmap_refs".into(),
                    serde_json::to_value(&pod.configmap_refs).expect("refs serialize"),
                );
            }
            if let Some(kill) = plan.kills.last() {
                state.insert(
                    "last_termination".into(),
                    serde_json::to_value(kill).expect("kill record serializes"),
                );
            }
            let payload =
                EventPayload { object_state: Some(Value::Object(state)), ..EventPayload::default() };
            b.push(deleted_at, EventType::PodDeleted, Some(pod), None, payload);
        }
    }

    // Canonical order, then identity assignment.
    let mut events = b.events;
    events.sort_by_key(|e| e.timestamp.micros());
    let mut seen: BTreeMap<String, u32> = BTreeMap::new();
    for ev in &mut events {
        let identity = alloc::format!(
            "{}|{}|{}|{}|{}|{}",
            ev.event_type.as_str(),
            ev.namespace,
            ev.pod_name.as_deref().unwrap_or(""),
            ev.container_name.as_deref().unwrap_or(""),
            ev.configmap_name.as_deref().unwrap_or(""),
            ev.timestamp,
        );
        let next = seen.entry(identity).or_insert(0);
        ev.discriminator = *next;
        *next += 1;
        ev.event_id = ev.computed_id();
    }

    // Oracle assembly.
    let mut all_kills: Vec<KillRecord> = Vec::new();
    let mut pods = BTreeMap::new();
    let mut consumers = Vec::new();
    for plan in &plans {
        all_kills.extend(plan.kills.iter().cloned());
        pods.insert(
            plan.spec.name.clone(),
            PodTimeline {
                pod_name: plan.spec.name.clone(),
                container_name: plan.spec.container_name.clone(),
                created_at: plan.created_at,
                starts: plan.starts.clone(),
                kills: plan.kills.clone(),
                deleted_at: plan.deleted_at,
            },
        );
        if plan.deleted_at.is_some() {
            continue; // deleted pods have no live consumption view
        }
        let last_start = *plan.starts.last().expect("at least the initial start");
        for r in &plan.spec.configmap_refs {
            let timeline = &cm_timelines[&r.name];
            let current = timeline.hash_at(end).to_string();
            let visible_asof = match r.mode {
                ConsumeMode::Env => last_start,
                ConsumeMode::Volume => {
                    // Volume content reflects the latest change whose sync has
                    // landed, or the mount at the last (re)start.
                    let last_synced = timeline
                        .changes
                        .iter()
                        .rev()
                        .find(|c| c.at.add_seconds(sc.kubelet_sync_delay_s as i64) <= end)
                        .map(|c| c.at);
                    match last_synced {
                        Some(at) if at > last_start => at,
                        _ => last_start,
                    }
                }
            };
            consumers.push(ConsumerView {
                pod_name: plan.spec.name.clone(),
                configmap_name: r.name.clone(),
                mode: r.mode,
                visible_hash: timeline.hash_at(visible_asof).to_string(),
                current_hash: current,
            });
        }
    }
    all_kills.sort_by_key(|k| k.finished_at.micros());

    Ok(ScenarioOutput {
        events,
        oracle: OracleTrace { horizon: end, kills: all_kills, pods, consumers },
    })
}

/// A uniform fleet of identical crash-looping pods staggered over the first
/// few seconds: per-pod event and edge counts are constant, so totals scale
/// exactly linearly with the pod count.
pub fn stress_scenario(pod_count: u32, duration_s: u64, seed: u64) -> SimScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pods = (0..pod_count)
        .map(|i| {
            let offset = rng.gen_range(0..5);
            PodSpec {
                name: alloc::format!("stress-{i:04}"),
                container_name: "app".to_string(),
                memory_limit_bytes: 67_108_864,
                memory_request_bytes: 67_108_864,
                cpu_limit_millicores: 100,
                cpu_request_millicores: 100,
                allocation_bytes: 134_217_728,
                start_offset_s: offset,
                first_crash_at_s: Some(offset + 2),
                delete_at_s: None,
                status_resync_period_s: None,
                emit_terminated: true,
                configmap_refs: Vec::new(),
            }
        })
        .collect();
    SimScenario {
        schema: 1,
        name: alloc::format!("stress_{pod_count}"),
        description: alloc::format!("{pod_count} identical crash-looping pods"),
        namespace: "oma-stress".to_string(),
        seed,
        start_time: default_start_time(),
        duration_s,
        capture_delay_ms_range: default_capture_delay(),
        kubelet_sync_delay_s: default_sync_delay(),
        node: NodeSpec {
            name: "node-1".to_string(),
            allocatable_memory_bytes: 1_099_511_627_776,
            pressure_threshold_fraction: 0.95,
        },
        configmaps: Vec::new(),
        pods: Vec::new(),
        configmap_patches: Vec::new(),
    }
    .with_pods(pods)
}

impl SimScenario {
    fn with_pods(mut self, pods: Vec<PodSpec>) -> Self {
        self.pods = pods;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn crasher(name: &str, first_crash_at_s: u64) -> PodSpec {
        PodSpec {
            name: name.to_string(),
            container_name: "app".to_string(),
            memory_limit_bytes: 67_108_864,
            memory_request_bytes: 67_108_864,
            cpu_limit_millicores: 100,
            cpu_request_millicores: 100,
            allocation_bytes: 134_217_728,
            start_offset_s: 0,
            first_crash_at_s: Some(first_crash_at_s),
            delete_at_s: None,
            status_resync_period_s: None,
            emit_terminated: false,
            configmap_refs: Vec::new(),
        }
    }

    fn quiet(name: &str) -> PodSpec {
        PodSpec {
            name: name.to_string(),
            container_name: "app".to_string(),
            memory_limit_bytes: 67_108_864,
            memory_request_bytes: 67_108_864,
            cpu_limit_millicores: 100,
            cpu_request_millicores: 100,
            allocation_bytes: 33_554_432,
            start_offset_s: 0,
            first_crash_at_s: None,
            delete_at_s: None,
            status_resync_period_s: None,
            emit_terminated: false,
            configmap_refs: Vec::new(),
        }
    }

    fn base_scenario(pods: Vec<PodSpec>, duration_s: u64) -> SimScenario {
        SimScenario {
            schema: 1,
            name: "test".to_string(),
            description: String::new(),
            namespace: "test-ns".to_string(),
            seed: 7,
            start_time: default_start_time(),
            duration_s,
            capture_delay_ms_range: [0.05, 3.0],
            kubelet_sync_delay_s: 30,
            node: NodeSpec {
                name: "node-1".to_string(),
                allocatable_memory_bytes: 8_589_934_592,
                pressure_threshold_fraction: 0.8,
            },
            configmaps: Vec::new(),
            pods,
            configmap_patches: Vec::new(),
        }
    }

    #[test]
    fn backoff_doubles_from_twenty_and_caps_at_five_minutes() {
        let seconds: Vec<u64> = (0..8).map(backoff_schedule).collect();
        assert_eq!(seconds, vec![0, 20, 40, 80, 160, 300, 300, 300]);
        assert_eq!(backoff_schedule(10), 300);
    }

    #[test]
    fn identical_scenarios_produce_identical_logs() {
        let sc = base_scenario(vec![crasher("boom", 30)], 200);
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.oracle, b.oracle);
        assert!(!a.events.is_empty());
    }

    #[test]
    fn seed_changes_capture_delays_but_not_structure() {
        let sc = base_scenario(vec![crasher("boom", 30)], 200);
        let mut other = sc.clone();
        other.seed = 8;
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&other).unwrap();
        assert_eq!(a.events.len(), b.events.len());
        assert_ne!(
            a.events.iter().map(|e| e.timestamp.micros()).collect::<Vec<_>>(),
            b.events.iter().map(|e| e.timestamp.micros()).collect::<Vec<_>>(),
        );
    }

    #[test]
    fn log_preserves_every_kill_but_describe_shows_one() {
        // first crash 30 s: kills at 30, 80, 150; the third backoff (80 s)
        // runs past the 200 s horizon, so the pod sits in backoff at the end.
        let sc = base_scenario(vec![crasher("boom", 30)], 200);
        let out = run_scenario(&sc).unwrap();
        assert_eq!(out.oracle.kills.len(), 3);
        let logged_kills =
            out.events.iter().filter(|e| e.event_type == EventType::OOMKill).count();
        assert_eq!(logged_kills, 3);

        let t = |s: i64| sc.start_time.add_seconds(s);
        // Between kill #1 and kill #2 the visible record is kill #1 only.
        let mid = out.oracle.describe("boom", t(60)).unwrap();
        assert_eq!(mid.last_termination.as_ref().unwrap().finished_at, t(30));
        assert_eq!(mid.restart_count, 1);
        // After kill #2 the record for kill #1 is destroyed.
        let later = out.oracle.describe("boom", t(100)).unwrap();
        assert_eq!(later.last_termination.as_ref().unwrap().finished_at, t(80));
        // At the horizon only the last kill is recoverable; it is in backoff.
        let horizon = out.oracle.describe("boom", out.oracle.horizon).unwrap();
        assert_eq!(horizon.phase, "Failed");
        assert!(!horizon.container_running);
        assert_eq!(horizon.last_termination.as_ref().unwrap().finished_at, t(150));
        assert_eq!(out.oracle.recoverable_terminations(), 1);
        assert_eq!(out.oracle.unrecoverable_kills(), 2);
    }

    #[test]
    fn deletion_destroys_even_the_last_termination_record() {
        let mut pod = crasher("boom", 30);
        pod.delete_at_s = Some(100); // during the second backoff (80..120)
        let sc = base_scenario(vec![pod], 200);
        let out = run_scenario(&sc).unwrap();
        assert_eq!(out.oracle.kills.len(), 2); // kills at 30 and 80
        assert!(out.oracle.describe("boom", sc.start_time.add_seconds(150)).is_none());
        assert_eq!(out.oracle.recoverable_terminations(), 0);
        let deleted: Vec<_> =
            out.events.iter().filter(|e| e.event_type == EventType::PodDeleted).collect();
        assert_eq!(deleted.len(), 1);
        let state = deleted[0].payload.object_state.as_ref().unwrap();
        assert_eq!(state["phase"], "Failed");
        assert_eq!(state["restart_count"], 1);
        assert_eq!(state["memory_limit_bytes"], 67_108_864u64);
        assert_eq!(state["last_termination"]["finished_at"], "2026-01-15T10:01:20Z");
    }

    #[test]
    fn every_evidence_event_carries_the_full_bundle() {
        let mut pod = crasher("boom", 30);
        pod.status_resync_period_s = Some(45);
        pod.configmap_refs =
            vec![ConfigMapRef { name: "cfg".to_string(), mode: ConsumeMode::Env }];
        let mut sc = base_scenario(vec![pod], 200);
        sc.configmaps = vec![ConfigMapSpec {
            name: "cfg".to_string(),
            data: [("k".to_string(), "v".to_string())].into_iter().collect(),
        }];
        let out = run_scenario(&sc).unwrap();
        let evidence: Vec<_> = out
            .events
            .iter()
            .filter(|e| e.event_type == EventType::OOMKillEvidence)
            .collect();
        assert!(evidence.len() > out.oracle.kills.len());
        for ev in evidence {
            assert_eq!(ev.payload.exit_code, Some(137));
            assert_eq!(ev.payload.reason.as_deref(), Some("OOMKilled"));
            assert!(ev.payload.started_at.is_some());
            assert!(ev.payload.finished_at.is_some());
            assert!(ev.payload.restart_count.is_some());
            assert!(ev.payload.memory_limit_bytes.is_some());
            assert!(ev.payload.qos_class.is_some());
            assert!(ev.payload.configmap_refs.is_some());
            assert!(ev.payload.node_snapshot.is_some());
            assert!(ev.payload.finished_at.unwrap() <= ev.timestamp);
        }
    }

    #[test]
    fn pressure_flips_when_running_allocations_exceed_threshold() {
        // Ballast keeps the node just under the 80% threshold (6.87 GiB);
        // the crasher's 1 GiB pushes it over whenever its container runs.
        let mut ballast = quiet("ballast");
        ballast.memory_limit_bytes = 8_589_934_592;
        ballast.memory_request_bytes = 6_442_450_944;
        ballast.allocation_bytes = 6_442_450_944;
        let mut hog = crasher("hog", 30);
        hog.memory_limit_bytes = 536_870_912;
        hog.memory_request_bytes = 536_870_912;
        hog.allocation_bytes = 1_073_741_824;
        let sc = base_scenario(vec![ballast, hog], 180);
        let out = run_scenario(&sc).unwrap();
        let pressure: Vec<_> = out
            .events
            .iter()
            .filter(|e| e.event_type == EventType::NodeMemoryPressure)
            .collect();
        // Kills at 30, 80, 150 → runs begin at 0, 50, 120.
        let times: Vec<i64> = pressure
            .iter()
            .map(|e| e.timestamp.delta_micros(sc.start_time) / 1_000_000)
            .collect();
        assert_eq!(times, vec![0, 50, 120]);
        for p in &pressure {
            assert!(p.namespace.is_empty());
            assert_eq!(p.node_name.as_deref(), Some("node-1"));
            let snap = p.payload.node_snapshot.as_ref().unwrap();
            assert!(snap.memory_pressure);
        }
        // Evidence captured while the node is back under threshold reports
        // pressure false; the engine's precursor window still links the kill.
        let ev = out
            .events
            .iter()
            .find(|e| {
                e.event_type == EventType::OOMKillEvidence
                    && e.timestamp > sc.start_time.add_seconds(30)
            })
            .unwrap();
        assert!(!ev.payload.node_snapshot.as_ref().unwrap().memory_pressure);
    }

    #[test]
    fn env_consumers_go_stale_and_volume_consumers_sync() {
        let mut stale = quiet("stale-env");
        stale.configmap_refs =
            vec![ConfigMapRef { name: "cfg".to_string(), mode: ConsumeMode::Env }];
        let mut synced = quiet("synced-vol");
        synced.configmap_refs =
            vec![ConfigMapRef { name: "cfg".to_string(), mode: ConsumeMode::Volume }];
        let mut sc = base_scenario(vec![stale, synced], 200);
        sc.configmaps = vec![ConfigMapSpec {
            name: "cfg".to_string(),
            data: [("k".to_string(), "v1".to_string())].into_iter().collect(),
        }];
        sc.configmap_patches = vec![PatchSpec {
            name: "cfg".to_string(),
            at_s: 50,
            set: [("k".to_string(), "v2".to_string())].into_iter().collect(),
        }];
        let out = run_scenario(&sc).unwrap();

        let syncs: Vec<_> =
            out.events.iter().filter(|e| e.event_type == EventType::KubeletSync).collect();
        assert_eq!(syncs.len(), 1);
        assert_eq!(syncs[0].pod_name.as_deref(), Some("synced-vol"));
        assert_eq!(syncs[0].timestamp, sc.start_time.add_seconds(80));
        assert_eq!(syncs[0].payload.propagation_latency_ms, Some(30_000));

        let env_view =
            out.oracle.consumers.iter().find(|c| c.pod_name == "stale-env").unwrap();
        assert!(env_view.is_stale());
        let vol_view =
            out.oracle.consumers.iter().find(|c| c.pod_name == "synced-vol").unwrap();
        assert!(!vol_view.is_stale());
    }

    #[test]
    fn changes_chain_hashes_and_record_changed_keys() {
        let mut sc = base_scenario(vec![], 200);
        sc.configmaps = vec![ConfigMapSpec {
            name: "cfg".to_string(),
            data: [("a".to_string(), "1".to_string())].into_iter().collect(),
        }];
        sc.configmap_patches = vec![
            PatchSpec {
                name: "cfg".to_string(),
                at_s: 10,
                set: [("a".to_string(), "2".to_string())].into_iter().collect(),
            },
            PatchSpec {
                name: "cfg".to_string(),
                at_s: 20,
                set: [("b".to_string(), "3".to_string())].into_iter().collect(),
            },
        ];
        let out = run_scenario(&sc).unwrap();
        let changes: Vec<_> =
            out.events.iter().filter(|e| e.event_type == EventType::ConfigMapChanged).collect();
        assert_eq!(changes.len(), 2);
        assert_eq!(
            changes[0].payload.content_hash_after,
            changes[1].payload.content_hash_before
        );
        assert_ne!(
            changes[0].payload.content_hash_before,
            changes[0].payload.content_hash_after
        );
        assert_eq!(changes[1].payload.changed_keys, Some(vec!["b".to_string()]));
    }

    #[test]
    fn log_is_ordered_with_unique_consistent_ids() {
        let mut pod = crasher("boom", 10);
        pod.status_resync_period_s = Some(30); // tick at 30 collides with the restart
        let sc = base_scenario(vec![pod], 120);
        let out = run_scenario(&sc).unwrap();
        let mut ids = alloc::collections::BTreeSet::new();
        let mut prev = i64::MIN;
        for ev in &out.events {
            assert!(ev.timestamp.micros() >= prev);
            prev = ev.timestamp.micros();
            assert_eq!(ev.event_id, ev.computed_id());
            assert!(ids.insert(ev.event_id.clone()), "duplicate id {}", ev.event_id);
        }
        // The colliding pair is disambiguated, not dropped.
        let at_30: Vec<_> = out
            .events
            .iter()
            .filter(|e| {
                e.event_type == EventType::OOMKillEvidence
                    && e.timestamp == sc.start_time.add_seconds(30)
            })
            .collect();
        assert_eq!(at_30.len(), 2);
        assert_eq!(at_30[0].discriminator, 0);
        assert_eq!(at_30[1].discriminator, 1);
    }

    #[test]
    fn stress_fleet_scales_exactly_linearly() {
        let small = run_scenario(&stress_scenario(3, 120, 42)).unwrap();
        let large = run_scenario(&stress_scenario(6, 120, 42)).unwrap();
        assert_eq!(small.events.len() % 3, 0);
        assert_eq!(small.events.len() / 3, 14);
        assert_eq!(large.events.len(), small.events.len() * 2);
        assert_eq!(large.oracle.kills.len(), small.oracle.kills.len() * 2);
        for pod in stress_scenario(6, 120, 42).pods {
            assert!(pod.start_offset_s < 5);
            assert_eq!(pod.first_crash_at_s, Some(pod.start_offset_s + 2));
        }
        for ev in &small.events {
            if ev.event_type == EventType::OOMKill {
                assert_eq!(ev.payload.exit_code, Some(137));
            }
        }
    }

    #[test]
    fn scenario_serde_round_trips_with_defaults() {
        let sc = stress_scenario(2, 60, 1);
        let json = serde_json::to_string(&sc).unwrap();
        let back: SimScenario = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sc);

        let minimal: SimScenario = serde_json::from_str(
            r#"{"name":"m","namespace":"ns","duration_s":10,
                "node":{"name":"n1","allocatable_memory_bytes":1024}}"#,
        )
        .unwrap();
        assert_eq!(minimal.schema, 1);
        assert_eq!(minimal.start_time, default_start_time());
        assert_eq!(minimal.capture_delay_ms_range, [0.05, 3.0]);
        assert_eq!(minimal.kubelet_sync_delay_s, 30);
        assert_eq!(minimal.node.pressure_threshold_fraction, 0.8);
        assert_eq!(minimal.seed, 0);
    }

    #[test]
    fn validation_rejects_inconsistent_scenarios() {
        // Crasher without a declared first crash time.
        let mut sc = base_scenario(vec![crasher("boom", 30)], 200);
        sc.pods[0].first_crash_at_s = None;
        assert!(run_scenario(&sc).is_err());

        // First crash declared but allocation fits.
        let mut sc = base_scenario(vec![crasher("boom", 30)], 200);
        sc.pods[0].allocation_bytes = 1;
        assert!(run_scenario(&sc).is_err());

        let mut sc = base_scenario(vec![crasher("a", 30), crasher("b", 40)], 200);
        sc.pods[1].name = "a".to_string();
        assert!(run_scenario(&sc).is_err());

        // Capture delays must stay under the intra-cycle bound.
        let mut sc = base_scenario(vec![], 100);
        sc.capture_delay_ms_range = [50.0, 120.0];
        assert!(run_scenario(&sc).is_err());

        let mut sc = base_scenario(vec![], 100);
        sc.configmaps = vec![ConfigMapSpec {
            name: "cfg".to_string(),
            data: [("a".to_string(), "1".to_string())].into_iter().collect(),
        }];
        sc.configmap_patches = vec![PatchSpec {
            name: "cfg".to_string(),
            at_s: 10,
            set: [("a".to_string(), "1".to_string())].into_iter().collect(),
        }];
        assert!(run_scenario(&sc).is_err());

        // Refs must point at declared ConfigMaps.
        let mut sc = base_scenario(vec![quiet("w")], 100);
        sc.pods[0].configmap_refs =
            vec![ConfigMapRef { name: "ghost".to_string(), mode: ConsumeMode::Env }];
        assert!(run_scenario(&sc).is_err());
    }

    #[test]
    fn qos_class_follows_limits_and_requests() {
        let pod = crasher("q", 30);
        assert_eq!(pod.qos_class(), QosClass::Guaranteed);
        let mut burst = crasher("b", 30);
        burst.memory_request_bytes = burst.memory_limit_bytes / 2;
        assert_eq!(burst.qos_class(), QosClass::Burstable);
        let mut none = quiet("n");
        none.memory_limit_bytes = 0;
        none.memory_request_bytes = 0;
        none.cpu_limit_millicores = 0;
        none.cpu_request_millicores = 0;
        assert_eq!(none.qos_class(), QosClass::BestEffort);
    }
}
