//! Built-in scenario catalog and committed fixture upkeep.
//!
//! Every scenario here is deterministic: the committed JSON documents and
//! event-log fixtures under `fixtures/` are byte-for-byte regenerable from the
//! constructors in this module, and tests fail if they drift.

use std::collections::BTreeMap;

use oma_core::codec::encode_event;
use oma_core::sim::{
    run_scenario, stress_scenario, ConfigMapSpec, NodeSpec, PatchSpec, PodSpec, SimScenario,
};
use oma_core::{ConfigMapRef, ConsumeMode, Timestamp};

/// Names accepted by `simulate --scenario` without a file on disk.
pub const BUILTIN_SCENARIO_NAMES: &[&str] = &[
    "p001",
    "p001_aks",
    "p001_minikube_run1",
    "p001_pressure",
    "p002_silent_env",
    "p003_volume_sync",
    "stress_5",
    "stress_10",
    "stress_20",
];

/// Fixture basenames committed under `fixtures/scenarios` and `fixtures/logs`.
pub const COMMITTED_FIXTURES: &[&str] = &[
    "p001_aks",
    "p001_minikube_run1",
    "p002_silent_env",
    "p003_volume_sync",
    "stress_5",
    "stress_10",
    "stress_20",
];

/// Look up a built-in scenario by name.
pub fn builtin_scenario(name: &str) -> Option<SimScenario> {
    match name {
        "p001" => Some(p001_demo()),
        "p001_aks" => Some(p001_aks()),
        "p001_minikube_run1" => Some(p001_minikube_run1()),
        "p001_pressure" => Some(p001_pressure()),
        "p002_silent_env" => Some(p002_silent_env()),
        "p003_volume_sync" => Some(p003_volume_sync()),
        "stress_5" => Some(stress_scenario(5, 120, 42)),
        "stress_10" => Some(stress_scenario(10, 120, 42)),
        "stress_20" => Some(stress_scenario(20, 120, 42)),
        _ => None,
    }
}

/// Render a scenario as a pretty-printed JSON document (sorted keys, trailing
/// newline) — the on-disk format for scenario fixtures.
pub fn scenario_document(scenario: &SimScenario) -> String {
    let value = serde_json::to_value(scenario).expect("scenario serialization cannot fail");
    let mut doc = serde_json::to_string_pretty(&value).expect("value serialization cannot fail");
    doc.push('\n');
    doc
}

/// Run a scenario and render its event log (one canonical JSON line per
/// event) — the on-disk format for log fixtures.
pub fn scenario_log(scenario: &SimScenario) -> String {
    let output = run_scenario(scenario).expect("built-in scenarios are valid");
    let mut log = String::new();
    for event in &output.events {
        log.push_str(&encode_event(event));
        log.push('\n');
    }
    log
}

fn kv(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn node_8gi(name: &str) -> NodeSpec {
    NodeSpec {
        name: name.to_string(),
        allocatable_memory_bytes: 8 * 1024 * 1024 * 1024,
        pressure_threshold_fraction: 0.8,
    }
}

/// A pod whose workload fits comfortably inside its limit.
fn quiet_pod(name: &str, start_offset_s: u64, refs: Vec<ConfigMapRef>) -> PodSpec {
    PodSpec {
        name: name.to_string(),
        container_name: "app".to_string(),
        memory_limit_bytes: 128 * 1024 * 1024,
        memory_request_bytes: 128 * 1024 * 1024,
        cpu_limit_millicores: 100,
        cpu_request_millicores: 100,
        allocation_bytes: 32 * 1024 * 1024,
        start_offset_s,
        first_crash_at_s: None,
        delete_at_s: None,
        status_resync_period_s: None,
        emit_terminated: false,
        configmap_refs: refs,
    }
}

/// A Guaranteed-QoS pod allocating twice its 64 Mi limit, so every run ends in
/// an OOM kill after the same per-run delay.
fn oom_pod(name: &str, first_crash_at_s: u64) -> PodSpec {
    PodSpec {
        name: name.to_string(),
        container_name: "app".to_string(),
        memory_limit_bytes: 64 * 1024 * 1024,
        memory_request_bytes: 64 * 1024 * 1024,
        cpu_limit_millicores: 100,
        cpu_request_millicores: 100,
        allocation_bytes: 128 * 1024 * 1024,
        start_offset_s: 0,
        first_crash_at_s: Some(first_crash_at_s),
        delete_at_s: None,
        status_resync_period_s: None,
        emit_terminated: false,
        configmap_refs: Vec::new(),
    }
}

fn base_scenario(name: &str, description: &str, namespace: &str, seed: u64) -> SimScenario {
    SimScenario {
        schema: 1,
        name: name.to_string(),
        description: description.to_string(),
        namespace: namespace.to_string(),
        seed,
        start_time: Timestamp::parse(oma_core::sim::DEFAULT_START_TIME).expect("valid constant"),
        duration_s: 0,
        capture_delay_ms_range: [0.05, 3.0],
        kubelet_sync_delay_s: 30,
        node: node_8gi("node-1"),
        configmaps: Vec::new(),
        pods: Vec::new(),
        configmap_patches: Vec::new(),
    }
}

/// Crash-loop demo: an over-allocating pod is OOM-killed three times and then
/// deleted mid-backoff, destroying everything a live-state query could see.
fn p001_demo() -> SimScenario {
    let mut sc = base_scenario(
        "p001",
        "crash-looping pod killed three times, deleted during backoff",
        "oma-poc",
        11,
    );
    sc.duration_s = 110;
    sc.configmaps = vec![ConfigMapSpec {
        name: "oom-app-config".to_string(),
        data: kv(&[("LOG_LEVEL", "info")]),
    }];
    let mut crasher = oom_pod("oom-app", 6);
    crasher.delete_at_s = Some(100);
    crasher.emit_terminated = true;
    crasher.configmap_refs = vec![ConfigMapRef {
        name: "oom-app-config".to_string(),
        mode: ConsumeMode::Env,
    }];
    sc.pods = vec![crasher, quiet_pod("steady-web", 0, Vec::new())];
    sc
}

/// Replay of the managed-cluster crash-loop run: four kills, periodic status
/// resyncs, pod deleted while backing off.
fn p001_aks() -> SimScenario {
    let mut sc = base_scenario(
        "p001_aks",
        "managed-cluster replay: four OOM kills under resync, deleted in backoff",
        "aks-poc",
        17,
    );
    sc.duration_s = 450;
    let mut crasher = oom_pod("oom-app", 75);
    crasher.delete_at_s = Some(445);
    crasher.status_resync_period_s = Some(132);
    sc.pods = vec![crasher, quiet_pod("steady-web", 0, Vec::new())];
    sc
}

/// Replay of the single-node crash-loop run: six kills over a longer horizon.
fn p001_minikube_run1() -> SimScenario {
    let mut sc = base_scenario(
        "p001_minikube_run1",
        "single-node replay: six OOM kills under resync, deleted in backoff",
        "minikube-poc",
        19,
    );
    sc.duration_s = 1060;
    let mut crasher = oom_pod("oom-app", 75);
    crasher.delete_at_s = Some(1055);
    crasher.status_resync_period_s = Some(176);
    sc.pods = vec![crasher, quiet_pod("steady-web", 0, Vec::new())];
    sc
}

/// Node-pressure variant: a large ballast pod keeps the node near its
/// threshold, so each crasher run tips it over and NodeMemoryPressure
/// precursors precede every kill.
fn p001_pressure() -> SimScenario {
    let mut sc = base_scenario(
        "p001_pressure",
        "memory-pressure precursors: ballast pod tips the node over threshold",
        "oma-poc",
        23,
    );
    sc.duration_s = 180;
    sc.node = node_8gi("node-42");
    let ballast = PodSpec {
        name: "ballast-web".to_string(),
        container_name: "app".to_string(),
        memory_limit_bytes: 8 * 1024 * 1024 * 1024,
        memory_request_bytes: 6 * 1024 * 1024 * 1024,
        cpu_limit_millicores: 500,
        cpu_request_millicores: 500,
        allocation_bytes: 6 * 1024 * 1024 * 1024,
        start_offset_s: 0,
        first_crash_at_s: None,
        delete_at_s: None,
        status_resync_period_s: None,
        emit_terminated: false,
        configmap_refs: Vec::new(),
    };
    let hog = PodSpec {
        name: "mem-hog".to_string(),
        container_name: "app".to_string(),
        memory_limit_bytes: 512 * 1024 * 1024,
        memory_request_bytes: 512 * 1024 * 1024,
        cpu_limit_millicores: 100,
        cpu_request_millicores: 100,
        allocation_bytes: 1024 * 1024 * 1024,
        start_offset_s: 0,
        first_crash_at_s: Some(30),
        delete_at_s: None,
        status_resync_period_s: None,
        emit_terminated: false,
        configmap_refs: Vec::new(),
    };
    sc.pods = vec![ballast, hog];
    sc
}

/// Silent misconfiguration: a ConfigMap consumed as env vars is patched, one
/// consumer never restarts and keeps serving the stale value.
fn p002_silent_env() -> SimScenario {
    let mut sc = base_scenario(
        "p002_silent_env",
        "env-mode ConfigMap patched; one consumer never restarts",
        "oma-poc",
        29,
    );
    sc.duration_s = 140;
    sc.configmaps = vec![ConfigMapSpec {
        name: "app-config".to_string(),
        data: kv(&[("FEATURE_FLAG", "disabled")]),
    }];
    sc.configmap_patches = vec![PatchSpec {
        name: "app-config".to_string(),
        at_s: 10,
        set: kv(&[("FEATURE_FLAG", "enabled")]),
    }];
    let env_ref = || {
        vec![ConfigMapRef {
            name: "app-config".to_string(),
            mode: ConsumeMode::Env,
        }]
    };
    sc.pods = vec![
        quiet_pod("web-1", 0, env_ref()),
        quiet_pod("web-2", 50, env_ref()),
        quiet_pod("canary", 135, Vec::new()),
    ];
    sc
}

/// Volume-mode propagation: a patched ConfigMap reaches both mounted
/// consumers after the kubelet sync delay, without any restart.
fn p003_volume_sync() -> SimScenario {
    let mut sc = base_scenario(
        "p003_volume_sync",
        "volume-mode ConfigMap patch propagated by kubelet sync",
        "oma-poc",
        31,
    );
    sc.duration_s = 60;
    sc.configmaps = vec![ConfigMapSpec {
        name: "nginx-conf".to_string(),
        data: kv(&[("worker_connections", "1024")]),
    }];
    sc.configmap_patches = vec![PatchSpec {
        name: "nginx-conf".to_string(),
        at_s: 20,
        set: kv(&[("worker_connections", "2048")]),
    }];
    let volume_ref = || {
        vec![ConfigMapRef {
            name: "nginx-conf".to_string(),
            mode: ConsumeMode::Volume,
        }]
    };
    sc.pods = vec![
        quiet_pod("proxy-1", 0, volume_ref()),
        quiet_pod("proxy-2", 0, volume_ref()),
    ];
    sc
}
