//! Command-line interface: simulate, ingest, query, rebuild, bench, serve,
//! and pattern import/export.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unknown query targets,
//! malformed stores, or quarantined input lines). JSON output is canonical
//! sorted-key JSON plus a trailing newline, byte-identical to the HTTP
//! service's bodies for the same query.

use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use oma_core::sim::{run_scenario, SimScenario};
use oma_core::{canonical_json, encode_event, ObjectKind, PatternDefinition, Timestamp};

use crate::bench;
use crate::engine::{rebuild_edges, Engine};
use crate::fixtures::builtin_scenario;
use crate::http;
use crate::ingest::{ingest_file, IngestOptions};
use crate::query::{self, QueryError};
use crate::store::Store;

/// Output rendering for machine or human consumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

fn parse_timestamp(raw: &str) -> Result<Timestamp, String> {
    Timestamp::parse(raw).map_err(|err| err.to_string())
}

fn parse_kind(raw: &str) -> Result<ObjectKind, String> {
    raw.parse()
}

#[derive(Debug, Parser)]
#[command(
    name = "oma",
    version,
    about = "Operational memory for clusters: simulate, ingest, and interrogate lifecycle history"
)]
pub struct Cli {
    /// Output format for results and reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario (built-in name or JSON file) and write its event log.
    Simulate {
        /// Built-in scenario name or path to a scenario JSON document.
        #[arg(long)]
        scenario: String,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output path for the JSON-lines event log.
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest a JSON-lines event log into a store.
    Ingest {
        #[arg(long, env = "OMA_DB")]
        db: PathBuf,
        /// Source event log.
        #[arg(long)]
        input: PathBuf,
        /// Keep reading as the source grows (tail mode).
        #[arg(long)]
        follow: bool,
        /// Events per transaction batch.
        #[arg(long, default_value_t = 512)]
        batch_size: usize,
    },
    /// Run one of the canonical forensic queries.
    #[command(subcommand)]
    Query(QueryCommand),
    /// Drop and deterministically reconstruct all derived state.
    RebuildEdges {
        #[arg(long, env = "OMA_DB")]
        db: PathBuf,
    },
    /// Benchmark edge construction and ingest throughput.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Serve the canonical queries over read-only HTTP.
    Serve {
        #[arg(long, env = "OMA_DB")]
        db: PathBuf,
        /// HOST:PORT to listen on.
        #[arg(long, env = "OMA_LISTEN", default_value = "127.0.0.1:7700")]
        listen: String,
    },
    /// Export or import pattern definitions as a JSON document.
    #[command(subcommand)]
    Patterns(PatternsCommand),
}

#[derive(Debug, Subcommand)]
pub enum QueryCommand {
    /// Q1: reconstruct the causal predecessors of an event.
    Causal {
        #[arg(long, env = "OMA_DB")]
        db: PathBuf,
        #[arg(long)]
        event_id: String,
        /// Maximum traversal depth.
        #[arg(long, default_value_t = query::DEFAULT_MAX_DEPTH)]
        depth: u32,
    },
    /// Q2: list a pattern's instances inside a time window.
    Pattern {
        #[arg(long, env = "OMA_DB")]
        db: PathBuf,
        #[arg(long)]
        pattern_id: String,
        #[arg(long, value_parser = parse_timestamp)]
        since: Timestamp,
        #[arg(long, value_parser = parse_timestamp)]
        until: Timestamp,
    },
    /// Q3: frozen state of an object as of an instant.
    StateAt {
        #[arg(long, env = "OMA_DB")]
        db: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: ObjectKind,
        #[arg(long)]
        name: String,
        #[arg(long)]
        namespace: String,
        #[arg(long, value_parser = parse_timestamp)]
        at: Timestamp,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Repeated crash-loop runs summarized by edge latency class.
    Latency {
        #[arg(long, default_value_t = 30)]
        runs: u32,
    },
    /// Ingest throughput across a sweep of stress pod counts.
    Stress {
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        pods: Vec<u32>,
    },
}

#[derive(Debug, Subcommand)]
pub enum PatternsCommand {
    /// Print the store's pattern catalog as a JSON document.
    Export {
        #[arg(long, env = "OMA_DB")]
        db: PathBuf,
    },
    /// Upsert pattern definitions from a JSON document. Edges for changed
    /// patterns are not rebuilt automatically; run rebuild-edges afterwards.
    Import {
        #[arg(long, env = "OMA_DB")]
        db: PathBuf,
        /// Path to a {"patterns": [...]} document.
        #[arg(long)]
        file: PathBuf,
    },
}

/// Parse argv and run; the process exit code encodes the outcome.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn emit<T: Serialize>(format: Format, value: &T, table: impl FnOnce() -> String) {
    match format {
        Format::Json => {
            let mut body = canonical_json(value);
            body.push('\n');
            print!("{body}");
        }
        Format::Table => {
            let text = table();
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
        }
    }
}

/// Print the shared error body for a not-found query target and signal a data
/// error, mirroring the HTTP service's 404 responses.
fn data_error(err: &QueryError) -> u8 {
    let mut body = canonical_json(&err.body());
    body.push('\n');
    print!("{body}");
    2
}

fn load_scenario(reference: &str) -> anyhow::Result<SimScenario> {
    if let Some(builtin) = builtin_scenario(reference) {
        return Ok(builtin);
    }
    let raw = std::fs::read_to_string(reference)
        .with_context(|| format!("scenario {reference:?} is neither built-in nor readable"))?;
    let scenario: SimScenario =
        serde_json::from_str(&raw).with_context(|| format!("parse scenario {reference:?}"))?;
    Ok(scenario)
}

fn execute(cli: Cli) -> anyhow::Result<u8> {
    let format = cli.format;
    match cli.command {
        Command::Simulate { scenario, seed, out } => simulate(format, &scenario, seed, &out),
        Command::Ingest { db, input, follow, batch_size } => {
            ingest(format, &db, &input, follow, batch_size)
        }
        Command::Query(query) => run_query(format, query),
        Command::RebuildEdges { db } => {
            let store = Store::open(&db)?;
            let report = rebuild_edges(&store)?;
            emit(format, &report, || {
                format!(
                    "events_replayed: {}\nedges_constructed: {}\nabsence_events_synthesized: {}\n",
                    report.events_replayed,
                    report.edges_constructed,
                    report.absence_events_synthesized
                )
            });
            Ok(0)
        }
        Command::Bench(bench) => run_bench(format, bench),
        Command::Serve { db, listen } => serve(&db, &listen),
        Command::Patterns(cmd) => patterns(format, cmd),
    }
}

fn simulate(
    format: Format,
    reference: &str,
    seed: Option<u64>,
    out: &Path,
) -> anyhow::Result<u8> {
    let mut scenario = load_scenario(reference)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let output = run_scenario(&scenario)?;
    let mut log = String::new();
    for event in &output.events {
        log.push_str(&encode_event(event));
        log.push('\n');
    }
    std::fs::write(out, &log).with_context(|| format!("write {out:?}"))?;
    let summary = json!({
        "scenario": scenario.name,
        "seed": scenario.seed,
        "events": output.events.len(),
        "out": out.to_string_lossy(),
    });
    emit(format, &summary, || {
        format!(
            "wrote {} events to {} (scenario {}, seed {})\n",
            output.events.len(),
            out.display(),
            scenario.name,
            scenario.seed
        )
    });
    Ok(0)
}

fn ingest(
    format: Format,
    db: &Path,
    input: &Path,
    follow: bool,
    batch_size: usize,
) -> anyhow::Result<u8> {
    let store = Store::open(db)?;
    let engine = Engine::load(&store)?;
    let options = IngestOptions { batch_size, follow, ..IngestOptions::default() };
    let report = ingest_file(&store, &engine, input, &options)?;
    emit(format, &report, || {
        format!(
            "lines_read: {}\nevents_inserted: {}\nevents_duplicate: {}\nevents_quarantined: {}\nid_mismatches: {}\nedges_constructed: {}\nabsence_events_synthesized: {}\nsnapshots_inserted: {}\npeak_live_event_objects: {}\n",
            report.lines_read,
            report.events_inserted,
            report.events_duplicate,
            report.events_quarantined,
            report.id_mismatches,
            report.edges_constructed,
            report.absence_events_synthesized,
            report.snapshots_inserted,
            report.peak_live_event_objects,
        )
    });
    Ok(if report.events_quarantined > 0 { 2 } else { 0 })
}

fn run_query(format: Format, command: QueryCommand) -> anyhow::Result<u8> {
    match command {
        QueryCommand::Causal { db, event_id, depth } => {
            let store = Store::open_read_only(&db)?;
            match query::q1_causal_chain(&store, &event_id, depth) {
                Ok(chain) => {
                    emit(format, &chain, || query::render_chain(&chain));
                    Ok(0)
                }
                Err(err @ QueryError::UnknownEvent { .. }) => Ok(data_error(&err)),
                Err(err) => Err(err.into()),
            }
        }
        QueryCommand::Pattern { db, pattern_id, since, until } => {
            let store = Store::open_read_only(&db)?;
            match query::q2_pattern_history(&store, &pattern_id, since, until) {
                Ok(set) => {
                    emit(format, &set, || query::render_pattern(&set));
                    Ok(0)
                }
                Err(err @ QueryError::UnknownPattern { .. }) => Ok(data_error(&err)),
                Err(err) => Err(err.into()),
            }
        }
        QueryCommand::StateAt { db, kind, name, namespace, at } => {
            let store = Store::open_read_only(&db)?;
            let result = query::q3_state_at(&store, kind, &namespace, &name, at)?;
            emit(format, &result, || query::render_state(&result));
            Ok(0)
        }
    }
}

fn run_bench(format: Format, command: BenchCommand) -> anyhow::Result<u8> {
    match command {
        BenchCommand::Latency { runs } => {
            anyhow::ensure!(runs >= 1, "--runs must be at least 1");
            let report = bench::bench_latency(runs)?;
            emit(format, &report, || bench::render_latency(&report));
        }
        BenchCommand::Stress { pods } => {
            anyhow::ensure!(!pods.is_empty(), "--pods must name at least one count");
            let report = bench::bench_stress(&pods)?;
            emit(format, &report, || bench::render_stress(&report));
        }
    }
    Ok(0)
}

fn serve(db: &Path, listen: &str) -> anyhow::Result<u8> {
    let addr: SocketAddr = listen
        .to_socket_addrs()
        .with_context(|| format!("resolve listen address {listen:?}"))?
        .next()
        .with_context(|| format!("listen address {listen:?} resolved to nothing"))?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("oma: serving {} on http://{addr}", db.display());
    runtime.block_on(http::serve(db.to_path_buf(), addr))?;
    Ok(0)
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct PatternDocument {
    patterns: Vec<PatternDefinition>,
}

fn patterns(format: Format, command: PatternsCommand) -> anyhow::Result<u8> {
    match command {
        PatternsCommand::Export { db } => {
            let store = Store::open_read_only(&db)?;
            let doc = PatternDocument { patterns: store.list_patterns()? };
            emit(format, &doc, || {
                serde_json::to_string_pretty(
                    &serde_json::to_value(&doc).expect("value serialization cannot fail"),
                )
                .expect("value serialization cannot fail")
                    + "\n"
            });
            Ok(0)
        }
        PatternsCommand::Import { db, file } => {
            let raw = std::fs::read_to_string(&file).with_context(|| format!("read {file:?}"))?;
            let doc: PatternDocument =
                serde_json::from_str(&raw).with_context(|| format!("parse {file:?}"))?;
            for pattern in &doc.patterns {
                pattern
                    .validate()
                    .with_context(|| format!("pattern {:?}", pattern.pattern_id))?;
            }
            let store = Store::open(&db)?;
            let ids: Vec<&str> = doc.patterns.iter().map(|p| p.pattern_id.as_str()).collect();
            for pattern in &doc.patterns {
                store.put_pattern(pattern)?;
            }
            let summary = json!({"imported": doc.patterns.len(), "pattern_ids": ids});
            emit(format, &summary, || {
                format!("imported {} patterns: {}\n", doc.patterns.len(), ids.join(", "))
            });
            Ok(0)
        }
    }
}
