//! Benchmark harness: edge-latency classification and ingest stress reports.
//!
//! Latency statistics are computed from the microsecond timestamps of each
//! edge's endpoints rather than the stored integer-millisecond column, so the
//! sub-millisecond intra-cycle distribution survives into the report.

use serde::Serialize;

use oma_core::sim::{run_scenario, SimScenario};
use oma_core::{classify_edge, EdgeClass};

use crate::engine::Engine;
use crate::fixtures::builtin_scenario;
use crate::ingest::{ingest_events, IngestError};
use crate::store::Store;

/// Scenario length used by every stress row.
pub const STRESS_DURATION_S: u64 = 120;
/// Seed used by every stress row.
pub const STRESS_SEED: u64 = 42;

/// Distribution summary for one edge class, in milliseconds of event time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub count: u64,
    pub min_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl ClassStats {
    fn from_samples(samples: &[f64]) -> ClassStats {
        if samples.is_empty() {
            return ClassStats { count: 0, min_ms: 0.0, mean_ms: 0.0, max_ms: 0.0 };
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &s in samples {
            min = min.min(s);
            max = max.max(s);
            sum += s;
        }
        ClassStats { count: samples.len() as u64, min_ms: min, mean_ms: sum / samples.len() as f64, max_ms: max }
    }
}

/// Edge-latency report over repeated scenario runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub runs: u32,
    pub total_edges: u64,
    pub intra_cycle: ClassStats,
    pub cross_cycle: ClassStats,
}

/// One throughput row of a stress report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressRow {
    pub pods: u32,
    pub events: u64,
    pub events_per_sec: f64,
    pub edges: u64,
    pub peak_live_event_objects: u64,
}

/// Ingest throughput and edge totals across a sweep of pod counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressReport {
    pub duration_s: u64,
    pub seed: u64,
    pub rows: Vec<StressRow>,
}

fn ingest_fresh(scenario: &SimScenario) -> Result<(Store, crate::ingest::IngestReport), IngestError> {
    let output = run_scenario(scenario).expect("benchmark scenarios are valid");
    let store = Store::open_in_memory().map_err(IngestError::from)?;
    let engine = Engine::load(&store)?;
    let report = ingest_events(&store, &engine, &output.events, 512)?;
    Ok((store, report))
}

/// Run `scenario` once per seed in `1..=runs`, ingest each run into a fresh
/// store, and summarize every constructed edge by latency class.
pub fn bench_latency_scenario(
    scenario: &SimScenario,
    runs: u32,
) -> Result<LatencyReport, IngestError> {
    let mut intra = Vec::new();
    let mut cross = Vec::new();
    for seed in 1..=u64::from(runs) {
        let mut run = scenario.clone();
        run.seed = seed;
        let (store, _) = ingest_fresh(&run)?;
        for edge in store.all_edges()? {
            let from = store
                .get_event(&edge.from_event_id)?
                .expect("edge endpoints are enforced by the store");
            let to = store
                .get_event(&edge.to_event_id)?
                .expect("edge endpoints are enforced by the store");
            let delta_ms = (to.timestamp.micros() - from.timestamp.micros()) as f64 / 1000.0;
            match classify_edge(edge.event_time_delta_ms) {
                EdgeClass::IntraCycle => intra.push(delta_ms),
                EdgeClass::CrossCycle => cross.push(delta_ms),
            }
        }
    }
    Ok(LatencyReport {
        runs,
        total_edges: (intra.len() + cross.len()) as u64,
        intra_cycle: ClassStats::from_samples(&intra),
        cross_cycle: ClassStats::from_samples(&cross),
    })
}

/// Latency benchmark over the built-in crash-loop demo scenario.
pub fn bench_latency(runs: u32) -> Result<LatencyReport, IngestError> {
    let scenario = builtin_scenario("p001").expect("registry includes p001");
    bench_latency_scenario(&scenario, runs)
}

/// For each pod count, generate and ingest a fixed-seed stress scenario and
/// record throughput, edge totals, and the peak number of event objects ever
/// live in the ingest pipeline.
pub fn bench_stress(pod_counts: &[u32]) -> Result<StressReport, IngestError> {
    let mut rows = Vec::new();
    for &pods in pod_counts {
        let scenario = oma_core::sim::stress_scenario(pods, STRESS_DURATION_S, STRESS_SEED);
        let (store, report) = ingest_fresh(&scenario)?;
        let stats = store.stats().map_err(IngestError::from)?;
        rows.push(StressRow {
            pods,
            events: stats.events,
            events_per_sec: stats.events as f64 / STRESS_DURATION_S as f64,
            edges: stats.edges,
            peak_live_event_objects: report.peak_live_event_objects,
        });
    }
    Ok(StressReport { duration_s: STRESS_DURATION_S, seed: STRESS_SEED, rows })
}

/// Render a latency report as an aligned text table.
pub fn render_latency(report: &LatencyReport) -> String {
    let mut out = format!("runs: {}  total_edges: {}\n\n", report.runs, report.total_edges);
    out.push_str(&format!(
        "{:<12}  {:>6}  {:>10}  {:>10}  {:>10}\n",
        "CLASS", "COUNT", "MIN_MS", "MEAN_MS", "MAX_MS"
    ));
    for (name, stats) in
        [("intra_cycle", &report.intra_cycle), ("cross_cycle", &report.cross_cycle)]
    {
        out.push_str(&format!(
            "{:<12}  {:>6}  {:>10.3}  {:>10.3}  {:>10.3}\n",
            name, stats.count, stats.min_ms, stats.mean_ms, stats.max_ms
        ));
    }
    out
}

/// Render a stress report as an aligned text table.
pub fn render_stress(report: &StressReport) -> String {
    let mut out = format!("duration_s: {}  seed: {}\n\n", report.duration_s, report.seed);
    out.push_str(&format!(
        "{:>5}  {:>8}  {:>12}  {:>8}  {:>22}\n",
        "PODS", "EVENTS", "EVENTS/SEC", "EDGES", "PEAK_LIVE_EVENT_OBJS"
    ));
    for row in &report.rows {
        out.push_str(&format!(
            "{:>5}  {:>8}  {:>12.3}  {:>8}  {:>22}\n",
            row.pods, row.events, row.events_per_sec, row.edges, row.peak_live_event_objects
        ));
    }
    out
}
