//! The three canonical forensic queries: causal chain, pattern history, and
//! point-in-time state.
//!
//! All results serialize to stable sorted-key JSON (via
//! [`oma_core::canonical_json`]) and render to an aligned text table, so the
//! CLI and the HTTP service can share bodies byte-for-byte. Edge views omit
//! `construction_wall_ms`: wall time is build telemetry, not causal data.

use std::collections::HashSet;

use serde::Serialize;
use serde_json::json;

use oma_core::{CausalEdge, CausalEvent, EdgeType, ObjectKind, Snapshot, Timestamp};

use crate::store::{EventFilter, Store, StoreError};

/// Default traversal bound for causal-chain queries.
pub const DEFAULT_MAX_DEPTH: u32 = 10;

/// Failures surfaced by the query layer.
#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("unknown event: {event_id}")]
    UnknownEvent { event_id: String },
    #[error("unknown pattern: {pattern_id}")]
    UnknownPattern { pattern_id: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl QueryError {
    /// The JSON document reported for this error; shared by the CLI and the
    /// HTTP service so both surfaces answer identically.
    pub fn body(&self) -> serde_json::Value {
        match self {
            QueryError::UnknownEvent { event_id } => {
                json!({"error": "unknown_event", "event_id": event_id})
            }
            QueryError::UnknownPattern { pattern_id } => {
                json!({"error": "unknown_pattern", "pattern_id": pattern_id})
            }
            QueryError::Store(err) => json!({"error": "store", "message": err.to_string()}),
        }
    }
}

/// A causal edge as rendered to users.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeView {
    pub from_event_id: String,
    pub to_event_id: String,
    pub pattern_id: String,
    pub edge_type: EdgeType,
    pub confidence: f64,
    pub event_time_delta_ms: i64,
}

impl From<&CausalEdge> for EdgeView {
    fn from(edge: &CausalEdge) -> Self {
        EdgeView {
            from_event_id: edge.from_event_id.clone(),
            to_event_id: edge.to_event_id.clone(),
            pattern_id: edge.pattern_id.clone(),
            edge_type: edge.edge_type,
            confidence: edge.confidence,
            event_time_delta_ms: edge.event_time_delta_ms,
        }
    }
}

/// One ancestor discovered by the chain walk: the edge traversed and the
/// cause event it leads to, at its minimal distance from the root.
#[derive(Debug, Clone, Serialize)]
pub struct ChainLink {
    pub depth: u32,
    pub edge: EdgeView,
    pub event: CausalEvent,
}

/// Result of a causal-chain query: the root's ancestry, breadth-first.
#[derive(Debug, Clone, Serialize)]
pub struct CausalChain {
    pub root: CausalEvent,
    pub links: Vec<ChainLink>,
    pub truncated: bool,
}

/// Reconstruct the causal predecessors of `event_id` by reverse-edge
/// breadth-first traversal.
///
/// Every ancestor appears once, at its minimal depth; links are ordered by
/// (depth, event timestamp, event id). `truncated` is true exactly when
/// unvisited predecessors remain beyond `max_depth`, so raising the bound
/// never removes links already returned.
pub fn q1_causal_chain(
    store: &Store,
    event_id: &str,
    max_depth: u32,
) -> Result<CausalChain, QueryError> {
    let root = store.get_event(event_id)?.ok_or_else(|| QueryError::UnknownEvent {
        event_id: event_id.to_string(),
    })?;
    let mut visited: HashSet<String> = HashSet::new();
    visited.insert(root.event_id.clone());
    let mut frontier = vec![root.event_id.clone()];
    let mut links: Vec<ChainLink> = Vec::new();
    let mut truncated = false;
    let mut depth = 0u32;
    while !frontier.is_empty() {
        if depth == max_depth {
            for id in &frontier {
                if store.edges_to(id)?.iter().any(|e| !visited.contains(&e.from_event_id)) {
                    truncated = true;
                    break;
                }
            }
            break;
        }
        depth += 1;
        let mut next = Vec::new();
        for id in &frontier {
            for edge in store.edges_to(id)? {
                if visited.insert(edge.from_event_id.clone()) {
                    let event = store
                        .get_event(&edge.from_event_id)?
                        .expect("edge endpoints are enforced by the store");
                    next.push(edge.from_event_id.clone());
                    links.push(ChainLink { depth, edge: EdgeView::from(&edge), event });
                }
            }
        }
        frontier = next;
    }
    links.sort_by(|a, b| {
        (a.depth, a.event.timestamp, &a.event.event_id)
            .cmp(&(b.depth, b.event.timestamp, &b.event.event_id))
    });
    Ok(CausalChain { root, links, truncated })
}

/// An edge touching a pattern trigger plus the event at its other endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct RelatedEdge {
    pub edge: EdgeView,
    pub event: CausalEvent,
}

/// One occurrence of a pattern, anchored on its trigger event.
#[derive(Debug, Clone, Serialize)]
pub struct PatternInstance {
    pub trigger_event: CausalEvent,
    pub related: Vec<RelatedEdge>,
}

/// The queried time window, echoed back in results.
#[derive(Debug, Clone, Serialize)]
pub struct Window {
    pub since: Timestamp,
    pub until: Timestamp,
}

/// Result of a pattern-history query.
#[derive(Debug, Clone, Serialize)]
pub struct PatternInstanceSet {
    pub pattern_id: String,
    pub window: Window,
    pub instances: Vec<PatternInstance>,
}

/// Retrieve every instance of `pattern_id` whose trigger falls in
/// `[since, until]`, ordered by trigger timestamp.
///
/// `related` carries all of the pattern's edges touching the trigger —
/// outgoing evidence/effect/absence/propagation plus incoming precursor —
/// with the event at the far endpoint. Edges built by other patterns off the
/// same trigger event are not repeated here; they remain reachable under
/// their own pattern id.
pub fn q2_pattern_history(
    store: &Store,
    pattern_id: &str,
    since: Timestamp,
    until: Timestamp,
) -> Result<PatternInstanceSet, QueryError> {
    let pattern = store.get_pattern(pattern_id)?.ok_or_else(|| QueryError::UnknownPattern {
        pattern_id: pattern_id.to_string(),
    })?;
    let trigger_type = pattern.trigger().event_type;
    let filter = EventFilter { event_type: Some(trigger_type), ..Default::default() };
    let mut instances = Vec::new();
    for trigger_event in store.events_in_window(&filter, since, until)? {
        let mut related = Vec::new();
        for edge in store.edges_touching(&trigger_event.event_id)? {
            if edge.pattern_id != pattern_id {
                continue;
            }
            let other_id = if edge.from_event_id == trigger_event.event_id {
                &edge.to_event_id
            } else {
                &edge.from_event_id
            };
            let event = store
                .get_event(other_id)?
                .expect("edge endpoints are enforced by the store");
            related.push(RelatedEdge { edge: EdgeView::from(&edge), event });
        }
        instances.push(PatternInstance { trigger_event, related });
    }
    Ok(PatternInstanceSet {
        pattern_id: pattern_id.to_string(),
        window: Window { since, until },
        instances,
    })
}

/// Result of a state-at query. `found` discriminates the two shapes, echoing
/// the cluster's own found/404 split but as a value rather than an error.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum StateAtResult {
    Found {
        found: bool,
        snapshot: Snapshot,
        as_of: Timestamp,
        staleness_ms: i64,
    },
    NotFound {
        found: bool,
        object_kind: ObjectKind,
        object_name: String,
        namespace: String,
        as_of: Timestamp,
    },
}

impl StateAtResult {
    /// Whether a snapshot was found.
    pub fn is_found(&self) -> bool {
        matches!(self, StateAtResult::Found { .. })
    }
}

/// Return the frozen state of an object as of `t`: the stored snapshot with
/// the greatest timestamp ≤ `t`, with its staleness relative to `t`.
pub fn q3_state_at(
    store: &Store,
    object_kind: ObjectKind,
    namespace: &str,
    object_name: &str,
    t: Timestamp,
) -> Result<StateAtResult, QueryError> {
    match store.snapshot_at(object_kind, namespace, object_name, t)? {
        Some(snapshot) => {
            let staleness_ms = (t.micros() - snapshot.timestamp.micros()) / 1000;
            Ok(StateAtResult::Found { found: true, snapshot, as_of: t, staleness_ms })
        }
        None => Ok(StateAtResult::NotFound {
            found: false,
            object_kind,
            object_name: object_name.to_string(),
            namespace: namespace.to_string(),
            as_of: t,
        }),
    }
}

/// Compact one-line locator for an event: its namespace/pod, node, or
/// configmap scope, whichever identifies it.
fn event_scope(event: &CausalEvent) -> String {
    if let Some(pod) = &event.pod_name {
        format!("{}/{}", event.namespace, pod)
    } else if let Some(node) = &event.node_name {
        format!("node:{node}")
    } else if let Some(cm) = &event.configmap_name {
        format!("{}/cm:{}", event.namespace, cm)
    } else if event.namespace.is_empty() {
        "-".to_string()
    } else {
        event.namespace.clone()
    }
}

fn aligned(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let render = |out: &mut String, cells: &[String]| {
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            if i + 1 < cells.len() {
                for _ in cell.len()..widths[i] {
                    out.push(' ');
                }
            }
        }
        out.push('\n');
    };
    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    render(&mut out, &header_cells);
    for row in rows {
        render(&mut out, row);
    }
    out
}

/// Render a causal chain as an aligned text table.
pub fn render_chain(chain: &CausalChain) -> String {
    let mut out = format!(
        "root: {}  {}  {}  {}\ntruncated: {}\n",
        chain.root.event_id,
        chain.root.event_type.as_str(),
        chain.root.timestamp,
        event_scope(&chain.root),
        chain.truncated,
    );
    if chain.links.is_empty() {
        out.push_str("no causal predecessors\n");
        return out;
    }
    out.push('\n');
    let rows: Vec<Vec<String>> = chain
        .links
        .iter()
        .map(|link| {
            vec![
                link.depth.to_string(),
                link.edge.edge_type.as_str().to_string(),
                format!("{:.2}", link.edge.confidence),
                link.edge.event_time_delta_ms.to_string(),
                link.event.event_id.clone(),
                link.event.event_type.as_str().to_string(),
                link.event.timestamp.to_string(),
                event_scope(&link.event),
            ]
        })
        .collect();
    out.push_str(&aligned(
        &["DEPTH", "EDGE", "CONF", "DELTA_MS", "EVENT_ID", "TYPE", "TIMESTAMP", "SCOPE"],
        &rows,
    ));
    out
}

/// Render a pattern-instance set as an aligned text table.
pub fn render_pattern(set: &PatternInstanceSet) -> String {
    let mut out = format!(
        "pattern: {}  window: [{}, {}]  instances: {}\n",
        set.pattern_id,
        set.window.since,
        set.window.until,
        set.instances.len()
    );
    for instance in &set.instances {
        out.push_str(&format!(
            "\ntrigger: {}  {}  {}  {}\n",
            instance.trigger_event.event_id,
            instance.trigger_event.event_type.as_str(),
            instance.trigger_event.timestamp,
            event_scope(&instance.trigger_event),
        ));
        if instance.related.is_empty() {
            out.push_str("  (no edges)\n");
            continue;
        }
        let rows: Vec<Vec<String>> = instance
            .related
            .iter()
            .map(|rel| {
                let direction =
                    if rel.edge.from_event_id == instance.trigger_event.event_id { "->" } else { "<-" };
                vec![
                    format!("  {}", rel.edge.edge_type.as_str()),
                    direction.to_string(),
                    format!("{:.2}", rel.edge.confidence),
                    rel.edge.event_time_delta_ms.to_string(),
                    rel.event.event_id.clone(),
                    rel.event.event_type.as_str().to_string(),
                    rel.event.timestamp.to_string(),
                ]
            })
            .collect();
        out.push_str(&aligned(
            &["  EDGE", "DIR", "CONF", "DELTA_MS", "EVENT_ID", "TYPE", "TIMESTAMP"],
            &rows,
        ));
    }
    out
}

/// Render a state-at result as readable text.
pub fn render_state(result: &StateAtResult) -> String {
    match result {
        StateAtResult::Found { snapshot, as_of, staleness_ms, .. } => {
            let state = serde_json::to_string_pretty(&snapshot.state_blob)
                .expect("value serialization cannot fail");
            format!(
                "found: true\nkind: {}  namespace: {}  name: {}\nsnapshot_at: {}  as_of: {}  staleness_ms: {}\nstate:\n{}\n",
                snapshot.object_kind.as_str(),
                snapshot.namespace,
                snapshot.object_name,
                snapshot.timestamp,
                as_of,
                staleness_ms,
                state,
            )
        }
        StateAtResult::NotFound { object_kind, object_name, namespace, as_of, .. } => format!(
            "found: false\nkind: {}  namespace: {}  name: {}\nas_of: {}\nno snapshot at or before this instant\n",
            object_kind.as_str(),
            namespace,
            object_name,
            as_of,
        ),
    }
}
