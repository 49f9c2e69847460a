//! Streaming log ingestion: decode JSONL lines, persist events idempotently,
//! run the pattern engine inline, materialize snapshots carried by deletion
//! events, and quarantine anything unusable.
//!
//! The pipeline holds O(1) decoded events regardless of log size: one line is
//! processed at a time and edge candidates are window-bounded. Batches of
//! inserts share a transaction; the watermark advances at batch boundaries,
//! which is also when due absence deadlines materialize.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use oma_core::{decode_event, CausalEvent, DecodeError, EventType, ObjectKind, Snapshot, Timestamp};

use crate::engine::{Engine, EngineError};
use crate::store::{InsertOutcome, Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Knobs for one ingest run.
#[derive(Clone, Debug)]
pub struct IngestOptions {
    /// Events per transaction.
    pub batch_size: usize,
    /// Keep polling for appended lines after EOF.
    pub follow: bool,
    /// Poll interval in follow mode.
    pub poll_interval: Duration,
    /// Cooperative stop for follow mode; checked at EOF.
    pub stop: Option<Arc<AtomicBool>>,
    /// Where rejected lines go; defaults to `<source>.quarantine`.
    pub quarantine_path: Option<PathBuf>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            batch_size: 512,
            follow: false,
            poll_interval: Duration::from_millis(100),
            stop: None,
            quarantine_path: None,
        }
    }
}

/// Counters and samples from one ingest run.
#[derive(Clone, Default, PartialEq, Debug, Serialize)]
pub struct IngestReport {
    pub lines_read: u64,
    pub events_inserted: u64,
    pub events_duplicate: u64,
    pub events_quarantined: u64,
    /// Lines whose embedded id did not match recomputation; they are accepted
    /// with the recomputed id.
    pub id_mismatches: u64,
    pub edges_constructed: u64,
    pub absence_events_synthesized: u64,
    pub snapshots_inserted: u64,
    /// Peak simultaneously-live decoded event objects (streaming invariant).
    pub peak_live_event_objects: u64,
    /// Wall-clock construction time per edge; informational only, excluded
    /// from serialized output because it is machine-dependent.
    #[serde(skip)]
    pub construction_wall_ms: Vec<f64>,
}

/// Why a line was quarantined instead of stored.
fn quarantine_reason(event: &CausalEvent) -> Option<&'static str> {
    if event.event_type == EventType::PodNotRestarted {
        // Absence events are engine output; accepting them from a source
        // would let a log forge derivations.
        Some("synthesized event type in source")
    } else if event.pattern_id.is_some() {
        Some("pattern_id present in source")
    } else {
        None
    }
}

struct Session<'s> {
    store: &'s Store,
    engine: &'s Engine,
    batch_size: usize,
    report: IngestReport,
    quarantine: Option<BufWriter<File>>,
    tx_open: bool,
    in_batch: usize,
    batch_max_ts: Option<Timestamp>,
}

impl<'s> Session<'s> {
    fn new(
        store: &'s Store,
        engine: &'s Engine,
        batch_size: usize,
        quarantine: Option<BufWriter<File>>,
    ) -> Session<'s> {
        store.reset_live_peak();
        Session {
            store,
            engine,
            batch_size: batch_size.max(1),
            report: IngestReport::default(),
            quarantine,
            tx_open: false,
            in_batch: 0,
            batch_max_ts: None,
        }
    }

    fn begin_if_needed(&mut self) -> Result<()> {
        if !self.tx_open {
            self.store.raw_execute("BEGIN")?;
            self.tx_open = true;
        }
        Ok(())
    }

    /// Commit the open batch, advancing the watermark first so absence
    /// deadlines materialize atomically with the events that passed them.
    fn flush(&mut self) -> Result<()> {
        if !self.tx_open {
            return Ok(());
        }
        if let Some(ts) = self.batch_max_ts.take() {
            let synthesis = self.engine.advance_watermark(self.store, ts)?;
            self.report.absence_events_synthesized += synthesis.events.len() as u64;
            self.report.edges_constructed += synthesis.edges.len() as u64;
            self.report
                .construction_wall_ms
                .extend(synthesis.edges.iter().map(|e| e.construction_wall_ms));
        }
        self.store.raw_execute("COMMIT")?;
        self.tx_open = false;
        self.in_batch = 0;
        Ok(())
    }

    fn send_to_quarantine(&mut self, line: &str) -> Result<()> {
        self.report.events_quarantined += 1;
        if let Some(q) = self.quarantine.as_mut() {
            q.write_all(line.as_bytes())?;
            q.write_all(b"\n")?;
        }
        Ok(())
    }

    fn process_line(&mut self, line: &str) -> Result<()> {
        if line.trim().is_empty() {
            return Ok(());
        }
        self.report.lines_read += 1;
        let decoded = match decode_event(line) {
            Ok(d) => d,
            Err(
                DecodeError::MalformedLine(_)
                | DecodeError::UnknownEventType(_)
                | DecodeError::MalformedTimestamp(_)
                | DecodeError::UnsupportedSchema(_),
            ) => {
                return self.send_to_quarantine(line);
            }
        };
        let mut event = decoded.event;
        if quarantine_reason(&event).is_some() {
            return self.send_to_quarantine(line);
        }
        if decoded.id_mismatch {
            self.report.id_mismatches += 1;
            event.event_id = event.computed_id();
        }
        self.process_event(event)
    }

    fn process_event(&mut self, event: CausalEvent) -> Result<()> {
        let _live = self.store.track_live(1);
        self.begin_if_needed()?;
        match self.store.insert_event(&event)? {
            InsertOutcome::Duplicate => {
                self.report.events_duplicate += 1;
            }
            InsertOutcome::Inserted => {
                self.report.events_inserted += 1;
                let edges = self.engine.on_event_inserted(self.store, &event)?;
                self.report.edges_constructed += edges.len() as u64;
                self.report
                    .construction_wall_ms
                    .extend(edges.iter().map(|e| e.construction_wall_ms));
                if event.event_type == EventType::PodDeleted {
                    self.materialize_snapshot(&event)?;
                }
            }
        }
        self.batch_max_ts = Some(match self.batch_max_ts {
            Some(ts) => ts.max(event.timestamp),
            None => event.timestamp,
        });
        self.in_batch += 1;
        if self.in_batch >= self.batch_size {
            self.flush()?;
        }
        Ok(())
    }

    /// Deletion events carry the object's frozen final state; persist it as a
    /// point-in-time snapshot row.
    fn materialize_snapshot(&mut self, event: &CausalEvent) -> Result<()> {
        let (Some(pod), Some(state)) = (&event.pod_name, &event.payload.object_state) else {
            return Ok(());
        };
        let snapshot = Snapshot {
            object_kind: ObjectKind::Pod,
            object_name: pod.clone(),
            namespace: event.namespace.clone(),
            timestamp: event.timestamp,
            state_blob: state.clone(),
        };
        if self.store.insert_snapshot(&snapshot)?.is_inserted() {
            self.report.snapshots_inserted += 1;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<IngestReport> {
        self.flush()?;
        if let Some(q) = self.quarantine.as_mut() {
            q.flush()?;
        }
        self.report.peak_live_event_objects = self.store.live_peak() as u64;
        Ok(std::mem::take(&mut self.report))
    }
}

impl Drop for Session<'_> {
    fn drop(&mut self) {
        if self.tx_open {
            let _ = self.store.raw_execute("ROLLBACK");
        }
    }
}

/// Ingest a JSONL log file. In follow mode the call keeps polling for
/// appended lines until the stop flag is raised; partial trailing lines are
/// retained until their newline arrives.
pub fn ingest_file(
    store: &Store,
    engine: &Engine,
    source: &Path,
    options: &IngestOptions,
) -> Result<IngestReport> {
    let file = File::open(source)?;
    let mut reader = BufReader::new(file);
    let quarantine_path = options.quarantine_path.clone().unwrap_or_else(|| {
        let mut p = source.as_os_str().to_owned();
        p.push(".quarantine");
        PathBuf::from(p)
    });
    let quarantine = BufWriter::new(File::create(&quarantine_path)?);
    let mut session = Session::new(store, engine, options.batch_size, Some(quarantine));

    let mut pending = String::new();
    loop {
        let mut chunk = String::new();
        let n = reader.read_line(&mut chunk)?;
        if n == 0 {
            if options.follow {
                session.flush()?;
                let stopped =
                    options.stop.as_ref().map(|s| s.load(Ordering::Relaxed)).unwrap_or(false);
                if stopped {
                    break;
                }
                std::thread::sleep(options.poll_interval);
                continue;
            }
            break;
        }
        pending.push_str(&chunk);
        if pending.ends_with('\n') {
            let line = pending.trim_end_matches(['\n', '\r']).to_string();
            session.process_line(&line)?;
            pending.clear();
        }
        // A chunk without its newline yet is a write in progress; keep
        // accumulating.
    }
    if !pending.is_empty() {
        // Final line without a terminator: complete at real EOF.
        session.process_line(pending.trim_end_matches(['\n', '\r']))?;
    }
    session.finish()
}

/// Ingest already-decoded events (no file, no quarantine), e.g. from the
/// simulator straight into a benchmark store.
pub fn ingest_events(
    store: &Store,
    engine: &Engine,
    events: &[CausalEvent],
    batch_size: usize,
) -> Result<IngestReport> {
    let mut session = Session::new(store, engine, batch_size, None);
    for event in events {
        session.report.lines_read += 1;
        if quarantine_reason(event).is_some() {
            session.report.events_quarantined += 1;
            continue;
        }
        session.process_event(event.clone())?;
    }
    session.finish()
}
