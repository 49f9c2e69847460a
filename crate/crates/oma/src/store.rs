//! SQLite-backed store: events, causal edges, snapshots, patterns, and the
//! bookkeeping the pattern engine needs (consumer observations, pending
//! absence triggers, ingest watermark).
//!
//! One writer at a time, enforced with an advisory lock on `<db>.lock`;
//! any number of read-only handles may coexist with it (WAL journaling gives
//! them consistent snapshots, so a reader never sees an event without the
//! edges committed alongside it).

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs::File;
use std::os::fd::AsRawFd;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rusqlite::{params, Connection, OpenFlags, OptionalExtension};
use serde::Serialize;

use oma_core::{
    builtin_patterns, canonical_json, CausalEdge, CausalEvent, ConsumeMode, EdgeType, EventType,
    ObjectKind, PatternDefinition, Snapshot, Timestamp,
};

/// Version stamped into `meta`; bump on any breaking schema change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store is locked by another writer: {path}")]
    LockedByWriter { path: PathBuf },
    #[error("schema version mismatch: found {found}, expected {expected}")]
    SchemaMismatch { found: String, expected: u32 },
    #[error("edge endpoint not present in the event table: {from} -> {to}")]
    DanglingEndpoint { from: String, to: String },
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StoreError>;

/// Outcome of an idempotent insert.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum InsertOutcome {
    Inserted,
    Duplicate,
}

impl InsertOutcome {
    pub fn is_inserted(self) -> bool {
        matches!(self, InsertOutcome::Inserted)
    }
}

/// Optional per-column event filters, combined with AND.
#[derive(Clone, Copy, Default, Debug)]
pub struct EventFilter<'a> {
    pub event_type: Option<EventType>,
    pub namespace: Option<&'a str>,
    pub pod_name: Option<&'a str>,
    pub node_name: Option<&'a str>,
    pub configmap_name: Option<&'a str>,
    /// Restrict to events that came from a source log (not synthesized).
    pub source_only: bool,
}

/// A pending "this should have happened by the deadline" check, recorded when
/// a trigger with an absence step is inserted and resolved exactly once.
#[derive(Clone, PartialEq, Debug)]
pub struct AbsenceTriggerRow {
    pub trigger_event_id: String,
    pub pattern_id: String,
    pub absence_event_type: EventType,
    pub namespace: String,
    pub configmap_name: String,
    pub consume_mode: ConsumeMode,
    pub trigger_ts: Timestamp,
    pub cutoff_ts: Timestamp,
    pub confidence: f64,
}

/// Aggregate counts for health checks and reports.
#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct StoreStats {
    pub events: u64,
    pub events_by_type: BTreeMap<String, u64>,
    pub edges: u64,
    pub edges_by_pattern: BTreeMap<String, u64>,
    pub edges_by_class: BTreeMap<String, u64>,
    pub snapshots: u64,
    pub patterns: u64,
    pub watermark: Option<Timestamp>,
}

#[derive(Default)]
struct LiveGauge {
    current: Cell<usize>,
    peak: Cell<usize>,
}

/// RAII handle for objects counted against the live-event gauge.
pub struct LiveGuard<'s> {
    store: &'s Store,
    n: usize,
}

impl Drop for LiveGuard<'_> {
    fn drop(&mut self) {
        let gauge = &self.store.live;
        gauge.current.set(gauge.current.get().saturating_sub(self.n));
    }
}

pub struct Store {
    conn: Connection,
    path: Option<PathBuf>,
    _lock: Option<File>,
    live: LiveGauge,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("path", &self.path)
            .field("writer", &self._lock.is_some())
            .finish_non_exhaustive()
    }
}

const SCHEMA_SQL: &str = "
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
) WITHOUT ROWID;

CREATE TABLE IF NOT EXISTS event (
    event_id       TEXT PRIMARY KEY,
    timestamp_us   INTEGER NOT NULL,
    event_type     TEXT NOT NULL,
    pattern_id     TEXT,
    namespace      TEXT NOT NULL,
    pod_name       TEXT,
    container_name TEXT,
    node_name      TEXT,
    configmap_name TEXT,
    discriminator  INTEGER NOT NULL DEFAULT 0,
    payload        TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_event_timestamp ON event (timestamp_us, event_id);
CREATE INDEX IF NOT EXISTS idx_event_type ON event (event_type, timestamp_us);
CREATE INDEX IF NOT EXISTS idx_event_pattern ON event (pattern_id)
    WHERE pattern_id IS NOT NULL;
CREATE INDEX IF NOT EXISTS idx_event_pod ON event (namespace, pod_name, timestamp_us);
CREATE INDEX IF NOT EXISTS idx_event_node ON event (node_name, timestamp_us);
CREATE INDEX IF NOT EXISTS idx_event_configmap ON event (namespace, configmap_name, timestamp_us);

CREATE TABLE IF NOT EXISTS causal_edges (
    from_event_id        TEXT NOT NULL REFERENCES event (event_id),
    to_event_id          TEXT NOT NULL REFERENCES event (event_id),
    pattern_id           TEXT NOT NULL,
    edge_type            TEXT NOT NULL
        CHECK (edge_type IN ('precursor','evidence','effect','absence','propagation')),
    confidence           REAL NOT NULL CHECK (confidence IN (0.9, 1.0)),
    event_time_delta_ms  INTEGER NOT NULL CHECK (event_time_delta_ms >= 0),
    construction_wall_ms REAL NOT NULL,
    PRIMARY KEY (from_event_id, to_event_id, edge_type)
);
CREATE INDEX IF NOT EXISTS idx_edges_to ON causal_edges (to_event_id);
CREATE INDEX IF NOT EXISTS idx_edges_pattern ON causal_edges (pattern_id);

CREATE TABLE IF NOT EXISTS snapshot (
    object_kind  TEXT NOT NULL CHECK (object_kind IN ('Pod','Node','ConfigMap')),
    object_name  TEXT NOT NULL,
    namespace    TEXT NOT NULL,
    timestamp_us INTEGER NOT NULL,
    state_blob   TEXT NOT NULL,
    PRIMARY KEY (object_kind, namespace, object_name, timestamp_us)
);
CREATE INDEX IF NOT EXISTS idx_snapshot_lookup ON snapshot (object_kind, object_name, timestamp_us);

CREATE TABLE IF NOT EXISTS pattern (
    pattern_id TEXT PRIMARY KEY,
    definition TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS cm_ref_obs (
    namespace      TEXT NOT NULL,
    pod_name       TEXT NOT NULL,
    observed_at_us INTEGER NOT NULL,
    refs           TEXT NOT NULL,
    PRIMARY KEY (namespace, pod_name, observed_at_us)
);

CREATE TABLE IF NOT EXISTS absence_trigger (
    trigger_event_id   TEXT NOT NULL,
    pattern_id         TEXT NOT NULL,
    absence_event_type TEXT NOT NULL,
    namespace          TEXT NOT NULL,
    configmap_name     TEXT NOT NULL,
    consume_mode       TEXT NOT NULL,
    trigger_ts_us      INTEGER NOT NULL,
    cutoff_ts_us       INTEGER NOT NULL,
    confidence         REAL NOT NULL,
    resolved           INTEGER NOT NULL DEFAULT 0,
    PRIMARY KEY (trigger_event_id, pattern_id, absence_event_type)
);
CREATE INDEX IF NOT EXISTS idx_absence_due ON absence_trigger (resolved, cutoff_ts_us);
";

fn apply_pragmas(conn: &Connection) -> rusqlite::Result<()> {
    // journal_mode returns the resulting mode as a row; in-memory databases
    // legitimately answer "memory" instead of "wal".
    conn.query_row("PRAGMA journal_mode = WAL", [], |row| row.get::<_, String>(0))?;
    conn.pragma_update(None, "synchronous", "NORMAL")?;
    conn.pragma_update(None, "foreign_keys", "ON")?;
    conn.busy_timeout(Duration::from_millis(5_000))?;
    Ok(())
}

fn acquire_writer_lock(db_path: &Path) -> Result<File> {
    let mut lock_path = db_path.as_os_str().to_owned();
    lock_path.push(".lock");
    let file = File::create(Path::new(&lock_path))?;
    let rc = unsafe { libc::flock(file.as_raw_fd(), libc::LOCK_EX | libc::LOCK_NB) };
    if rc != 0 {
        return Err(StoreError::LockedByWriter { path: db_path.to_path_buf() });
    }
    Ok(file)
}

impl Store {
    /// Open (creating if needed) a writable store. At most one writer may
    /// hold a given database at a time.
    pub fn open(path: impl AsRef<Path>) -> Result<Store> {
        let path = path.as_ref();
        let lock = acquire_writer_lock(path)?;
        let conn = Connection::open(path)?;
        apply_pragmas(&conn)?;
        let store = Store {
            conn,
            path: Some(path.to_path_buf()),
            _lock: Some(lock),
            live: LiveGauge::default(),
        };
        store.init_schema()?;
        Ok(store)
    }

    /// Open an existing store for querying only; never takes the writer lock.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Store> {
        let path = path.as_ref();
        let conn = Connection::open_with_flags(
            path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )?;
        apply_pragmas(&conn)?;
        let store =
            Store { conn, path: Some(path.to_path_buf()), _lock: None, live: LiveGauge::default() };
        store.check_schema_version()?;
        Ok(store)
    }

    /// A private in-memory store, mainly for benchmarks and tests.
    pub fn open_in_memory() -> Result<Store> {
        let conn = Connection::open_in_memory()?;
        apply_pragmas(&conn)?;
        let store = Store { conn, path: None, _lock: None, live: LiveGauge::default() };
        store.init_schema()?;
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn init_schema(&self) -> Result<()> {
        self.conn.execute_batch(SCHEMA_SQL)?;
        let existing: Option<String> = self
            .conn
            .query_row("SELECT value FROM meta WHERE key = 'schema_version'", [], |r| r.get(0))
            .optional()?;
        match existing {
            None => {
                self.conn.execute(
                    "INSERT INTO meta (key, value) VALUES ('schema_version', ?1)",
                    params![SCHEMA_VERSION.to_string()],
                )?;
            }
            Some(v) if v == SCHEMA_VERSION.to_string() => {}
            Some(v) => {
                return Err(StoreError::SchemaMismatch { found: v, expected: SCHEMA_VERSION })
            }
        }
        // The builtin catalog is data like any user-registered pattern;
        // explicit registrations override it but never silently vanish.
        let mut stmt = self
            .conn
            .prepare_cached("INSERT OR IGNORE INTO pattern (pattern_id, definition) VALUES (?1, ?2)")?;
        for p in builtin_patterns() {
            stmt.execute(params![p.pattern_id, canonical_json(&p)])?;
        }
        Ok(())
    }

    fn check_schema_version(&self) -> Result<()> {
        let found: Option<String> = self
            .conn
            .query_row("SELECT value FROM meta WHERE key = 'schema_version'", [], |r| r.get(0))
            .optional()
            .unwrap_or(None);
        match found {
            Some(v) if v == SCHEMA_VERSION.to_string() => Ok(()),
            Some(v) => Err(StoreError::SchemaMismatch { found: v, expected: SCHEMA_VERSION }),
            None => Err(StoreError::SchemaMismatch {
                found: "absent".to_string(),
                expected: SCHEMA_VERSION,
            }),
        }
    }

    /// Begin an explicit transaction; dropped uncommitted work rolls back.
    pub fn transaction(&self) -> Result<rusqlite::Transaction<'_>> {
        Ok(self.conn.unchecked_transaction()?)
    }

    /// Raw statement execution for streaming sessions that manage their own
    /// BEGIN/COMMIT lifecycle.
    pub(crate) fn raw_execute(&self, sql: &str) -> Result<()> {
        self.conn.execute_batch(sql)?;
        Ok(())
    }

    // ---- live-object gauge -------------------------------------------------

    /// Count `n` decoded/materialized events as live until the guard drops.
    pub fn track_live(&self, n: usize) -> LiveGuard<'_> {
        let current = self.live.current.get() + n;
        self.live.current.set(current);
        if current > self.live.peak.get() {
            self.live.peak.set(current);
        }
        LiveGuard { store: self, n }
    }

    pub fn live_peak(&self) -> usize {
        self.live.peak.get()
    }

    pub fn reset_live_peak(&self) {
        self.live.peak.set(self.live.current.get());
    }

    // ---- events ------------------------------------------------------------

    pub fn insert_event(&self, event: &CausalEvent) -> Result<InsertOutcome> {
        let mut stmt = self.conn.prepare_cached(
            "INSERT INTO event (event_id, timestamp_us, event_type, pattern_id, namespace,
                                pod_name, container_name, node_name, configmap_name,
                                discriminator, payload)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)",
        )?;
        let outcome = stmt.execute(params![
            event.event_id,
            event.timestamp.micros(),
            event.event_type.as_str(),
            event.pattern_id,
            event.namespace,
            event.pod_name,
            event.container_name,
            event.node_name,
            event.configmap_name,
            event.discriminator,
            canonical_json(&event.payload),
        ]);
        match outcome {
            Ok(_) => Ok(InsertOutcome::Inserted),
            Err(e) if is_unique_violation(&e) => Ok(InsertOutcome::Duplicate),
            Err(e) => Err(e.into()),
        }
    }

    pub fn get_event(&self, event_id: &str) -> Result<Option<CausalEvent>> {
        let mut stmt =
            self.conn.prepare_cached(&format!("{EVENT_SELECT} WHERE event_id = ?1"))?;
        let mut rows = stmt.query(params![event_id])?;
        match rows.next()? {
            Some(row) => Ok(Some(row_to_event(row)?)),
            None => Ok(None),
        }
    }

    pub fn has_event(&self, event_id: &str) -> Result<bool> {
        let mut stmt =
            self.conn.prepare_cached("SELECT 1 FROM event WHERE event_id = ?1 LIMIT 1")?;
        Ok(stmt.exists(params![event_id])?)
    }

    /// Events in the inclusive window `[lo, hi]` matching the filter, ordered
    /// by (timestamp, event_id).
    pub fn events_in_window(
        &self,
        filter: &EventFilter<'_>,
        lo: Timestamp,
        hi: Timestamp,
    ) -> Result<Vec<CausalEvent>> {
        let mut sql = format!("{EVENT_SELECT} WHERE timestamp_us >= ?1 AND timestamp_us <= ?2");
        let mut args: Vec<Box<dyn rusqlite::ToSql>> =
            vec![Box::new(lo.micros()), Box::new(hi.micros())];
        let mut bind = |clause: &str, value: Box<dyn rusqlite::ToSql>| {
            args.push(value);
            sql.push_str(&format!(" AND {} = ?{}", clause, args.len()));
        };
        if let Some(t) = filter.event_type {
            bind("event_type", Box::new(t.as_str()));
        }
        if let Some(ns) = filter.namespace {
            bind("namespace", Box::new(ns.to_string()));
        }
        if let Some(p) = filter.pod_name {
            bind("pod_name", Box::new(p.to_string()));
        }
        if let Some(n) = filter.node_name {
            bind("node_name", Box::new(n.to_string()));
        }
        if let Some(c) = filter.configmap_name {
            bind("configmap_name", Box::new(c.to_string()));
        }
        if filter.source_only {
            sql.push_str(" AND pattern_id IS NULL");
        }
        sql.push_str(" ORDER BY timestamp_us, event_id");
        let mut stmt = self.conn.prepare_cached(&sql)?;
        let params_ref: Vec<&dyn rusqlite::ToSql> = args.iter().map(|b| b.as_ref()).collect();
        let mut rows = stmt.query(params_ref.as_slice())?;
        let mut events = Vec::new();
        while let Some(row) = rows.next()? {
            events.push(row_to_event(row)?);
        }
        Ok(events)
    }

    /// True when a matching event exists in the half-open window `(lo, hi]`.
    pub fn has_event_between(
        &self,
        event_type: EventType,
        namespace: &str,
        pod_name: &str,
        lo_exclusive: Timestamp,
        hi_inclusive: Timestamp,
    ) -> Result<bool> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT 1 FROM event
             WHERE namespace = ?1 AND pod_name = ?2 AND event_type = ?3
               AND timestamp_us > ?4 AND timestamp_us <= ?5
             LIMIT 1",
        )?;
        Ok(stmt.exists(params![
            namespace,
            pod_name,
            event_type.as_str(),
            lo_exclusive.micros(),
            hi_inclusive.micros(),
        ])?)
    }

    /// All event ids ordered by (timestamp, event_id); the replay order.
    pub fn event_ids_by_time(&self) -> Result<Vec<String>> {
        let mut stmt = self
            .conn
            .prepare_cached("SELECT event_id FROM event ORDER BY timestamp_us, event_id")?;
        let ids = stmt.query_map([], |r| r.get(0))?.collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(ids)
    }

    /// Largest event timestamp, if any events exist.
    pub fn max_event_timestamp(&self) -> Result<Option<Timestamp>> {
        let max: Option<i64> =
            self.conn.query_row("SELECT MAX(timestamp_us) FROM event", [], |r| r.get(0))?;
        Ok(max.map(Timestamp::from_micros))
    }

    pub fn delete_synthesized_events(&self) -> Result<usize> {
        Ok(self.conn.execute("DELETE FROM event WHERE pattern_id IS NOT NULL", [])?)
    }

    // ---- edges -------------------------------------------------------------

    pub fn insert_edge(&self, edge: &CausalEdge) -> Result<InsertOutcome> {
        let mut stmt = self.conn.prepare_cached(
            "INSERT INTO causal_edges (from_event_id, to_event_id, pattern_id, edge_type,
                                       confidence, event_time_delta_ms, construction_wall_ms)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
        )?;
        let outcome = stmt.execute(params![
            edge.from_event_id,
            edge.to_event_id,
            edge.pattern_id,
            edge.edge_type.as_str(),
            edge.confidence,
            edge.event_time_delta_ms,
            edge.construction_wall_ms,
        ]);
        match outcome {
            Ok(_) => Ok(InsertOutcome::Inserted),
            Err(e) if is_unique_violation(&e) => Ok(InsertOutcome::Duplicate),
            Err(e) if is_foreign_key_violation(&e) => Err(StoreError::DanglingEndpoint {
                from: edge.from_event_id.clone(),
                to: edge.to_event_id.clone(),
            }),
            Err(e) => Err(e.into()),
        }
    }

    pub fn edges_to(&self, event_id: &str) -> Result<Vec<CausalEdge>> {
        self.edge_query(
            &format!("{EDGE_SELECT} WHERE to_event_id = ?1 ORDER BY from_event_id, edge_type"),
            event_id,
        )
    }

    pub fn edges_from(&self, event_id: &str) -> Result<Vec<CausalEdge>> {
        self.edge_query(
            &format!("{EDGE_SELECT} WHERE from_event_id = ?1 ORDER BY to_event_id, edge_type"),
            event_id,
        )
    }

    pub fn edges_touching(&self, event_id: &str) -> Result<Vec<CausalEdge>> {
        self.edge_query(
            &format!(
                "{EDGE_SELECT} WHERE from_event_id = ?1 OR to_event_id = ?1
                 ORDER BY from_event_id, to_event_id, edge_type"
            ),
            event_id,
        )
    }

    pub fn edges_for_pattern(&self, pattern_id: &str) -> Result<Vec<CausalEdge>> {
        self.edge_query(
            &format!(
                "{EDGE_SELECT} WHERE pattern_id = ?1
                 ORDER BY from_event_id, to_event_id, edge_type"
            ),
            pattern_id,
        )
    }

    pub fn all_edges(&self) -> Result<Vec<CausalEdge>> {
        let mut stmt = self.conn.prepare_cached(&format!(
            "{EDGE_SELECT} ORDER BY from_event_id, to_event_id, edge_type"
        ))?;
        let mut rows = stmt.query([])?;
        let mut edges = Vec::new();
        while let Some(row) = rows.next()? {
            edges.push(row_to_edge(row)?);
        }
        Ok(edges)
    }

    fn edge_query(&self, sql: &str, arg: &str) -> Result<Vec<CausalEdge>> {
        let mut stmt = self.conn.prepare_cached(sql)?;
        let mut rows = stmt.query(params![arg])?;
        let mut edges = Vec::new();
        while let Some(row) = rows.next()? {
            edges.push(row_to_edge(row)?);
        }
        Ok(edges)
    }

    pub fn delete_all_edges(&self) -> Result<usize> {
        Ok(self.conn.execute("DELETE FROM causal_edges", [])?)
    }

    // ---- snapshots ---------------------------------------------------------

    pub fn insert_snapshot(&self, snapshot: &Snapshot) -> Result<InsertOutcome> {
        let mut stmt = self.conn.prepare_cached(
            "INSERT INTO snapshot (object_kind, object_name, namespace, timestamp_us, state_blob)
             VALUES (?1, ?2, ?3, ?4, ?5)",
        )?;
        let outcome = stmt.execute(params![
            snapshot.object_kind.as_str(),
            snapshot.object_name,
            snapshot.namespace,
            snapshot.timestamp.micros(),
            canonical_json(&snapshot.state_blob),
        ]);
        match outcome {
            Ok(_) => Ok(InsertOutcome::Inserted),
            Err(e) if is_unique_violation(&e) => Ok(InsertOutcome::Duplicate),
            Err(e) => Err(e.into()),
        }
    }

    /// Latest snapshot of the object at or before `at`.
    pub fn snapshot_at(
        &self,
        kind: ObjectKind,
        namespace: &str,
        name: &str,
        at: Timestamp,
    ) -> Result<Option<Snapshot>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT object_kind, object_name, namespace, timestamp_us, state_blob
             FROM snapshot
             WHERE object_kind = ?1 AND namespace = ?2 AND object_name = ?3
               AND timestamp_us <= ?4
             ORDER BY timestamp_us DESC
             LIMIT 1",
        )?;
        let mut rows = stmt.query(params![kind.as_str(), namespace, name, at.micros()])?;
        match rows.next()? {
            Some(row) => Ok(Some(row_to_snapshot(row)?)),
            None => Ok(None),
        }
    }

    pub fn all_snapshots(&self) -> Result<Vec<Snapshot>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT object_kind, object_name, namespace, timestamp_us, state_blob
             FROM snapshot
             ORDER BY object_kind, namespace, object_name, timestamp_us",
        )?;
        let mut rows = stmt.query([])?;
        let mut snapshots = Vec::new();
        while let Some(row) = rows.next()? {
            snapshots.push(row_to_snapshot(row)?);
        }
        Ok(snapshots)
    }

    // ---- patterns ----------------------------------------------------------

    pub fn put_pattern(&self, pattern: &PatternDefinition) -> Result<()> {
        let mut stmt = self.conn.prepare_cached(
            "INSERT INTO pattern (pattern_id, definition) VALUES (?1, ?2)
             ON CONFLICT (pattern_id) DO UPDATE SET definition = excluded.definition",
        )?;
        stmt.execute(params![pattern.pattern_id, canonical_json(pattern)])?;
        Ok(())
    }

    pub fn get_pattern(&self, pattern_id: &str) -> Result<Option<PatternDefinition>> {
        let raw: Option<String> = self
            .conn
            .query_row(
                "SELECT definition FROM pattern WHERE pattern_id = ?1",
                params![pattern_id],
                |r| r.get(0),
            )
            .optional()?;
        raw.map(|json| {
            serde_json::from_str(&json).map_err(|e| {
                rusqlite::Error::FromSqlConversionFailure(
                    0,
                    rusqlite::types::Type::Text,
                    Box::new(e),
                )
                .into()
            })
        })
        .transpose()
    }

    pub fn list_patterns(&self) -> Result<Vec<PatternDefinition>> {
        let mut stmt = self
            .conn
            .prepare_cached("SELECT definition FROM pattern ORDER BY pattern_id")?;
        let mut rows = stmt.query([])?;
        let mut patterns = Vec::new();
        while let Some(row) = rows.next()? {
            let json: String = row.get(0)?;
            let parsed = serde_json::from_str(&json).map_err(|e| {
                rusqlite::Error::FromSqlConversionFailure(
                    0,
                    rusqlite::types::Type::Text,
                    Box::new(e),
                )
            })?;
            patterns.push(parsed);
        }
        Ok(patterns)
    }

    // ---- watermark ---------------------------------------------------------

    /// High-water mark of ingested source-event time.
    pub fn watermark(&self) -> Result<Option<Timestamp>> {
        let raw: Option<String> = self
            .conn
            .query_row("SELECT value FROM meta WHERE key = 'watermark_us'", [], |r| r.get(0))
            .optional()?;
        Ok(raw.and_then(|v| v.parse::<i64>().ok()).map(Timestamp::from_micros))
    }

    /// Monotone advance; never moves backwards.
    pub fn advance_watermark(&self, ts: Timestamp) -> Result<Timestamp> {
        let current = self.watermark()?;
        let next = current.map_or(ts, |w| w.max(ts));
        if current != Some(next) {
            self.conn.execute(
                "INSERT INTO meta (key, value) VALUES ('watermark_us', ?1)
                 ON CONFLICT (key) DO UPDATE SET value = excluded.value",
                params![next.micros().to_string()],
            )?;
        }
        Ok(next)
    }

    pub fn clear_watermark(&self) -> Result<()> {
        self.conn.execute("DELETE FROM meta WHERE key = 'watermark_us'", [])?;
        Ok(())
    }

    // ---- consumer observations ----------------------------------------------

    /// Record the ConfigMap refs a pod was observed with at `observed_at`.
    pub fn record_cm_refs(
        &self,
        namespace: &str,
        pod_name: &str,
        observed_at: Timestamp,
        refs: &[oma_core::ConfigMapRef],
    ) -> Result<()> {
        let mut stmt = self.conn.prepare_cached(
            "INSERT OR REPLACE INTO cm_ref_obs (namespace, pod_name, observed_at_us, refs)
             VALUES (?1, ?2, ?3, ?4)",
        )?;
        stmt.execute(params![namespace, pod_name, observed_at.micros(), canonical_json(&refs)])?;
        Ok(())
    }

    /// Pods whose most recent observation at or before `cutoff` references
    /// `configmap_name` in `mode`, ordered by pod name.
    pub fn consumers_of(
        &self,
        namespace: &str,
        configmap_name: &str,
        mode: ConsumeMode,
        cutoff: Timestamp,
    ) -> Result<Vec<String>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT o.pod_name, o.refs FROM cm_ref_obs o
             WHERE o.namespace = ?1
               AND o.observed_at_us = (
                   SELECT MAX(i.observed_at_us) FROM cm_ref_obs i
                   WHERE i.namespace = o.namespace AND i.pod_name = o.pod_name
                     AND i.observed_at_us <= ?2)
             ORDER BY o.pod_name",
        )?;
        let mut rows = stmt.query(params![namespace, cutoff.micros()])?;
        let mut pods = Vec::new();
        while let Some(row) = rows.next()? {
            let pod: String = row.get(0)?;
            let refs_json: String = row.get(1)?;
            let refs: Vec<oma_core::ConfigMapRef> =
                serde_json::from_str(&refs_json).unwrap_or_default();
            if refs.iter().any(|r| r.name == configmap_name && r.mode == mode) {
                pods.push(pod);
            }
        }
        Ok(pods)
    }

    pub fn delete_all_cm_refs(&self) -> Result<usize> {
        Ok(self.conn.execute("DELETE FROM cm_ref_obs", [])?)
    }

    // ---- absence triggers ----------------------------------------------------

    pub fn insert_absence_trigger(&self, row: &AbsenceTriggerRow) -> Result<InsertOutcome> {
        let mut stmt = self.conn.prepare_cached(
            "INSERT INTO absence_trigger
                 (trigger_event_id, pattern_id, absence_event_type, namespace, configmap_name,
                  consume_mode, trigger_ts_us, cutoff_ts_us, confidence)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
        )?;
        let outcome = stmt.execute(params![
            row.trigger_event_id,
            row.pattern_id,
            row.absence_event_type.as_str(),
            row.namespace,
            row.configmap_name,
            row.consume_mode.as_str(),
            row.trigger_ts.micros(),
            row.cutoff_ts.micros(),
            row.confidence,
        ]);
        match outcome {
            Ok(_) => Ok(InsertOutcome::Inserted),
            Err(e) if is_unique_violation(&e) => Ok(InsertOutcome::Duplicate),
            Err(e) => Err(e.into()),
        }
    }

    /// Unresolved triggers whose cutoff is at or before the watermark,
    /// in deterministic (cutoff, trigger time, id) order.
    pub fn due_absence_triggers(&self, watermark: Timestamp) -> Result<Vec<AbsenceTriggerRow>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT trigger_event_id, pattern_id, absence_event_type, namespace, configmap_name,
                    consume_mode, trigger_ts_us, cutoff_ts_us, confidence
             FROM absence_trigger
             WHERE resolved = 0 AND cutoff_ts_us <= ?1
             ORDER BY cutoff_ts_us, trigger_ts_us, trigger_event_id",
        )?;
        let mut rows = stmt.query(params![watermark.micros()])?;
        let mut due = Vec::new();
        while let Some(row) = rows.next()? {
            let event_type: String = row.get(2)?;
            let mode: String = row.get(5)?;
            due.push(AbsenceTriggerRow {
                trigger_event_id: row.get(0)?,
                pattern_id: row.get(1)?,
                absence_event_type: EventType::from_str(&event_type).map_err(|e| {
                    rusqlite::Error::FromSqlConversionFailure(
                        2,
                        rusqlite::types::Type::Text,
                        Box::new(e),
                    )
                })?,
                namespace: row.get(3)?,
                configmap_name: row.get(4)?,
                consume_mode: if mode == "volume" {
                    ConsumeMode::Volume
                } else {
                    ConsumeMode::Env
                },
                trigger_ts: Timestamp::from_micros(row.get(6)?),
                cutoff_ts: Timestamp::from_micros(row.get(7)?),
                confidence: row.get(8)?,
            });
        }
        Ok(due)
    }

    pub fn mark_absence_resolved(
        &self,
        trigger_event_id: &str,
        pattern_id: &str,
        absence_event_type: EventType,
    ) -> Result<()> {
        self.conn.execute(
            "UPDATE absence_trigger SET resolved = 1
             WHERE trigger_event_id = ?1 AND pattern_id = ?2 AND absence_event_type = ?3",
            params![trigger_event_id, pattern_id, absence_event_type.as_str()],
        )?;
        Ok(())
    }

    pub fn delete_all_absence_triggers(&self) -> Result<usize> {
        Ok(self.conn.execute("DELETE FROM absence_trigger", [])?)
    }

    // ---- stats ---------------------------------------------------------------

    pub fn stats(&self) -> Result<StoreStats> {
        let count = |sql: &str| -> Result<u64> {
            Ok(self.conn.query_row(sql, [], |r| r.get::<_, i64>(0))? as u64)
        };
        let mut events_by_type = BTreeMap::new();
        {
            let mut stmt = self
                .conn
                .prepare_cached("SELECT event_type, COUNT(*) FROM event GROUP BY event_type")?;
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                events_by_type.insert(row.get::<_, String>(0)?, row.get::<_, i64>(1)? as u64);
            }
        }
        let mut edges_by_pattern = BTreeMap::new();
        {
            let mut stmt = self.conn.prepare_cached(
                "SELECT pattern_id, COUNT(*) FROM causal_edges GROUP BY pattern_id",
            )?;
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                edges_by_pattern.insert(row.get::<_, String>(0)?, row.get::<_, i64>(1)? as u64);
            }
        }
        let mut edges_by_class = BTreeMap::new();
        {
            let mut stmt = self.conn.prepare_cached(
                "SELECT CASE WHEN event_time_delta_ms < 100 THEN 'intra_cycle'
                             ELSE 'cross_cycle' END AS class, COUNT(*)
                 FROM causal_edges GROUP BY class",
            )?;
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                edges_by_class.insert(row.get::<_, String>(0)?, row.get::<_, i64>(1)? as u64);
            }
        }
        Ok(StoreStats {
            events: count("SELECT COUNT(*) FROM event")?,
            events_by_type,
            edges: count("SELECT COUNT(*) FROM causal_edges")?,
            edges_by_pattern,
            edges_by_class,
            snapshots: count("SELECT COUNT(*) FROM snapshot")?,
            patterns: count("SELECT COUNT(*) FROM pattern")?,
            watermark: self.watermark()?,
        })
    }
}

const EVENT_SELECT: &str = "SELECT event_id, timestamp_us, event_type, pattern_id, namespace,
    pod_name, container_name, node_name, configmap_name, discriminator, payload FROM event";

const EDGE_SELECT: &str = "SELECT from_event_id, to_event_id, pattern_id, edge_type, confidence,
    event_time_delta_ms, construction_wall_ms FROM causal_edges";

fn row_to_event(row: &rusqlite::Row<'_>) -> rusqlite::Result<CausalEvent> {
    let event_type: String = row.get(2)?;
    let payload: String = row.get(10)?;
    Ok(CausalEvent {
        event_id: row.get(0)?,
        timestamp: Timestamp::from_micros(row.get(1)?),
        event_type: EventType::from_str(&event_type).map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(2, rusqlite::types::Type::Text, Box::new(e))
        })?,
        pattern_id: row.get(3)?,
        namespace: row.get(4)?,
        pod_name: row.get(5)?,
        container_name: row.get(6)?,
        node_name: row.get(7)?,
        configmap_name: row.get(8)?,
        discriminator: row.get(9)?,
        payload: serde_json::from_str(&payload).map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(10, rusqlite::types::Type::Text, Box::new(e))
        })?,
    })
}

fn row_to_edge(row: &rusqlite::Row<'_>) -> rusqlite::Result<CausalEdge> {
    let edge_type: String = row.get(3)?;
    Ok(CausalEdge {
        from_event_id: row.get(0)?,
        to_event_id: row.get(1)?,
        pattern_id: row.get(2)?,
        edge_type: EdgeType::from_str(&edge_type).map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(
                3,
                rusqlite::types::Type::Text,
                Box::new(std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            )
        })?,
        confidence: row.get(4)?,
        event_time_delta_ms: row.get(5)?,
        construction_wall_ms: row.get(6)?,
    })
}

fn row_to_snapshot(row: &rusqlite::Row<'_>) -> rusqlite::Result<Snapshot> {
    let kind: String = row.get(0)?;
    let blob: String = row.get(4)?;
    Ok(Snapshot {
        object_kind: ObjectKind::from_str(&kind).map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(
                0,
                rusqlite::types::Type::Text,
                Box::new(std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            )
        })?,
        object_name: row.get(1)?,
        namespace: row.get(2)?,
        timestamp: Timestamp::from_micros(row.get(3)?),
        state_blob: serde_json::from_str(&blob).map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(4, rusqlite::types::Type::Text, Box::new(e))
        })?,
    })
}

fn constraint_code(e: &rusqlite::Error) -> Option<i32> {
    match e {
        rusqlite::Error::SqliteFailure(err, _) => Some(err.extended_code),
        _ => None,
    }
}

fn is_unique_violation(e: &rusqlite::Error) -> bool {
    matches!(constraint_code(e), Some(code) if code == 1555 || code == 2067)
}

fn is_foreign_key_violation(e: &rusqlite::Error) -> bool {
    constraint_code(e) == Some(787)
}
