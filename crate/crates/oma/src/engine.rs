//! Pattern engine: interprets pattern definitions against the store,
//! constructing causal edges retrospectively as events are inserted and
//! synthesizing absence events when the ingest watermark passes a deadline.
//!
//! Linking is strictly backward-looking. When an event arrives it may link to
//! earlier events inside a window, never to later ones; an out-of-order
//! stream therefore yields a subset of edges until `rebuild_edges` replays
//! the log in time order. Edges always point cause → effect.

use std::time::Instant;

use oma_core::{
    CausalEdge, CausalEvent, EventType, InvalidPattern, PatternDefinition, PatternRole, Scope,
    Timestamp,
};

use crate::store::{
    AbsenceTriggerRow, EventFilter, InsertOutcome, Store, StoreError,
};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    InvalidPattern(#[from] InvalidPattern),
}

pub type Result<T> = std::result::Result<T, EngineError>;

/// Events and edges materialized by a watermark advance.
#[derive(Default, Debug)]
pub struct SynthesisOutcome {
    pub events: Vec<CausalEvent>,
    pub edges: Vec<CausalEdge>,
}

/// Counters from an edge rebuild.
#[derive(Clone, Copy, Default, PartialEq, Eq, Debug, serde::Serialize)]
pub struct RebuildReport {
    pub events_replayed: u64,
    pub edges_constructed: u64,
    pub absence_events_synthesized: u64,
}

/// An interpreter over the store's pattern catalog. Construct one per store
/// session; it snapshots the catalog at load time.
pub struct Engine {
    patterns: Vec<PatternDefinition>,
}

impl Engine {
    /// Load and validate the catalog currently registered in the store.
    pub fn load(store: &Store) -> Result<Engine> {
        let patterns = store.list_patterns()?;
        for p in &patterns {
            p.validate()?;
        }
        Ok(Engine { patterns })
    }

    pub fn patterns(&self) -> &[PatternDefinition] {
        &self.patterns
    }

    /// React to a freshly inserted event: record consumer observations, queue
    /// absence deadlines, and construct every retrospective edge its patterns
    /// allow. Runs inside the caller's transaction. Returns the edges
    /// constructed (duplicates are skipped, not errors).
    pub fn on_event_inserted(&self, store: &Store, event: &CausalEvent) -> Result<Vec<CausalEdge>> {
        // Synthesized events are terminal: they never trigger or match.
        if event.pattern_id.is_some() {
            return Ok(Vec::new());
        }
        let started = Instant::now();
        let mut edges = Vec::new();

        if let Some(pod) = &event.pod_name {
            if let Some(refs) = &event.payload.configmap_refs {
                store.record_cm_refs(&event.namespace, pod, event.timestamp, refs)?;
            }
            if event.event_type == EventType::PodDeleted {
                // A deleted pod consumes nothing from here on.
                store.record_cm_refs(&event.namespace, pod, event.timestamp, &[])?;
            }
        }

        for pattern in &self.patterns {
            let trigger = pattern.trigger();
            if event.event_type == trigger.event_type {
                // The trigger arrived: link back to precursors and queue
                // absence deadlines. Evidence/effect linking stays
                // retrospective — it happens when those events arrive.
                for step in pattern.linked_steps() {
                    match step.role {
                        PatternRole::Precursor => {
                            self.link_candidates(
                                store, event, pattern, step, step.event_type, &started, &mut edges,
                            )?;
                        }
                        PatternRole::Absence => {
                            let Some(cm) = &event.configmap_name else { continue };
                            let Some(Scope::ConfigmapConsumers { mode }) = step.scope else {
                                continue;
                            };
                            store.insert_absence_trigger(&AbsenceTriggerRow {
                                trigger_event_id: event.event_id.clone(),
                                pattern_id: pattern.pattern_id.clone(),
                                absence_event_type: step.event_type,
                                namespace: event.namespace.clone(),
                                configmap_name: cm.clone(),
                                consume_mode: mode,
                                trigger_ts: event.timestamp,
                                cutoff_ts: event.timestamp.add_micros(step.window_micros()),
                                confidence: step.confidence.unwrap_or(1.0),
                            })?;
                        }
                        _ => {}
                    }
                }
            } else {
                for step in pattern.linked_steps() {
                    if step.event_type != event.event_type
                        || !matches!(
                            step.role,
                            PatternRole::Evidence | PatternRole::Effect | PatternRole::Propagation
                        )
                    {
                        continue;
                    }
                    self.link_candidates(
                        store, event, pattern, step, trigger.event_type, &started, &mut edges,
                    )?;
                }
            }
        }
        Ok(edges)
    }

    /// Link `event` back to every in-window candidate of `candidate_type`,
    /// inserting edges candidate → event.
    #[allow(clippy::too_many_arguments)]
    fn link_candidates(
        &self,
        store: &Store,
        event: &CausalEvent,
        pattern: &PatternDefinition,
        step: &oma_core::PatternStep,
        candidate_type: EventType,
        started: &Instant,
        edges: &mut Vec<CausalEdge>,
    ) -> Result<()> {
        let mut filter = EventFilter {
            event_type: Some(candidate_type),
            source_only: true,
            ..EventFilter::default()
        };
        match step.scope {
            Some(Scope::Pod) => {
                let Some(pod) = event.pod_name.as_deref() else { return Ok(()) };
                filter.namespace = Some(&event.namespace);
                filter.pod_name = Some(pod);
            }
            Some(Scope::Node) => {
                let Some(node) = event.node_name.as_deref() else { return Ok(()) };
                filter.node_name = Some(node);
            }
            Some(Scope::ConfigmapConsumers { .. }) => {
                let Some(cm) = event.configmap_name.as_deref() else { return Ok(()) };
                filter.namespace = Some(&event.namespace);
                filter.configmap_name = Some(cm);
            }
            None => return Ok(()),
        }
        let lo = event.timestamp.add_micros(-step.window_micros());
        let candidates = store.events_in_window(&filter, lo, event.timestamp)?;
        let _live = store.track_live(candidates.len());
        for cand in &candidates {
            let edge = CausalEdge {
                from_event_id: cand.event_id.clone(),
                to_event_id: event.event_id.clone(),
                pattern_id: pattern.pattern_id.clone(),
                edge_type: step.role.edge_type().expect("linked roles map to edge types"),
                confidence: step.confidence.unwrap_or(1.0),
                event_time_delta_ms: event.timestamp.delta_millis(cand.timestamp),
                construction_wall_ms: started.elapsed().as_secs_f64() * 1_000.0,
            };
            if store.insert_edge(&edge)?.is_inserted() {
                edges.push(edge);
            }
        }
        Ok(())
    }

    /// Advance the ingest watermark and materialize every absence whose
    /// deadline the watermark has now passed. Runs inside the caller's
    /// transaction.
    pub fn advance_watermark(&self, store: &Store, ts: Timestamp) -> Result<SynthesisOutcome> {
        let watermark = store.advance_watermark(ts)?;
        let mut outcome = SynthesisOutcome::default();
        for row in store.due_absence_triggers(watermark)? {
            let started = Instant::now();
            let trigger_event = store.get_event(&row.trigger_event_id)?;
            for pod in
                store.consumers_of(&row.namespace, &row.configmap_name, row.consume_mode, row.cutoff_ts)?
            {
                // The absence holds only if the pod did NOT restart between
                // the trigger and the deadline.
                if store.has_event_between(
                    EventType::ContainerStarted,
                    &row.namespace,
                    &pod,
                    row.trigger_ts,
                    row.cutoff_ts,
                )? {
                    continue;
                }
                let mut synthesized = CausalEvent {
                    event_id: String::new(),
                    timestamp: row.cutoff_ts,
                    event_type: row.absence_event_type,
                    pattern_id: Some(row.pattern_id.clone()),
                    namespace: row.namespace.clone(),
                    pod_name: Some(pod.clone()),
                    container_name: None,
                    node_name: None,
                    configmap_name: Some(row.configmap_name.clone()),
                    discriminator: 0,
                    payload: trigger_event
                        .as_ref()
                        .map(|t| t.payload.clone())
                        .unwrap_or_default(),
                };
                // Probe for the first free discriminator so ids stay unique
                // even if an identical identity already exists.
                loop {
                    synthesized.event_id = synthesized.computed_id();
                    if !store.has_event(&synthesized.event_id)? {
                        break;
                    }
                    synthesized.discriminator += 1;
                }
                store.insert_event(&synthesized)?;
                let edge = CausalEdge {
                    from_event_id: row.trigger_event_id.clone(),
                    to_event_id: synthesized.event_id.clone(),
                    pattern_id: row.pattern_id.clone(),
                    edge_type: oma_core::EdgeType::Absence,
                    confidence: row.confidence,
                    event_time_delta_ms: row.cutoff_ts.delta_millis(row.trigger_ts),
                    construction_wall_ms: started.elapsed().as_secs_f64() * 1_000.0,
                };
                if store.insert_edge(&edge)?.is_inserted() {
                    outcome.edges.push(edge);
                }
                outcome.events.push(synthesized);
            }
            store.mark_absence_resolved(
                &row.trigger_event_id,
                &row.pattern_id,
                row.absence_event_type,
            )?;
        }
        Ok(outcome)
    }

    /// Insert one event with full engine semantics in its own transaction:
    /// the row, its edges, and any due synthesis land atomically.
    pub fn insert_event_tx(
        &self,
        store: &Store,
        event: &CausalEvent,
    ) -> Result<(InsertOutcome, Vec<CausalEdge>, SynthesisOutcome)> {
        let tx = store.transaction()?;
        let outcome = store.insert_event(event)?;
        let (edges, synthesis) = match outcome {
            InsertOutcome::Inserted => {
                let edges = self.on_event_inserted(store, event)?;
                let synthesis = self.advance_watermark(store, event.timestamp)?;
                (edges, synthesis)
            }
            InsertOutcome::Duplicate => (Vec::new(), SynthesisOutcome::default()),
        };
        tx.commit().map_err(StoreError::from)?;
        Ok((outcome, edges, synthesis))
    }
}

/// Drop every edge and synthesized event, then replay the log in
/// (timestamp, event_id) order with the current pattern catalog. For a log
/// that was ingested in time order this reproduces the inline result exactly;
/// for a shuffled log it produces what sorted ingestion would have.
pub fn rebuild_edges(store: &Store) -> Result<RebuildReport> {
    let engine = Engine::load(store)?;
    let tx = store.transaction()?;
    let watermark_before = store.watermark()?;
    store.delete_all_edges()?;
    store.delete_synthesized_events()?;
    store.delete_all_cm_refs()?;
    store.delete_all_absence_triggers()?;
    store.clear_watermark()?;

    // Collect the replay order first so the scan never iterates a table
    // while inserting into it, and holds only ids, not events.
    let ids = store.event_ids_by_time()?;
    let mut report = RebuildReport { events_replayed: ids.len() as u64, ..Default::default() };
    for id in &ids {
        let event = store.get_event(id)?.expect("listed event id exists");
        let _live = store.track_live(1);
        report.edges_constructed += engine.on_event_inserted(store, &event)?.len() as u64;
        let synthesis = engine.advance_watermark(store, event.timestamp)?;
        report.absence_events_synthesized += synthesis.events.len() as u64;
        report.edges_constructed += synthesis.edges.len() as u64;
    }
    // Deadlines between the last event and the previous watermark may still
    // be due; the watermark itself must never move backwards.
    if let Some(wm) = watermark_before {
        let synthesis = engine.advance_watermark(store, wm)?;
        report.absence_events_synthesized += synthesis.events.len() as u64;
        report.edges_constructed += synthesis.edges.len() as u64;
    }
    tx.commit().map_err(StoreError::from)?;
    Ok(report)
}
