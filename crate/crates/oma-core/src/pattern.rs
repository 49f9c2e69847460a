//! Failure-pattern definitions and edge classification.
//!
//! Patterns are declarative data, not code: each is a list of steps naming an
//! event type, its causal role relative to the trigger step, a match window,
//! a confidence, and a scope rule. The engine interprets these generically,
//! so the builtin catalog (P001–P003) and any imported definition are handled
//! by the same machinery.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::event::{ConsumeMode, EdgeType, EventType};

/// Role a step plays relative to the pattern's trigger.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternRole {
    Trigger,
    Precursor,
    Evidence,
    Effect,
    Absence,
    Propagation,
}

impl PatternRole {
    /// The edge type produced by a step in this role (None for the trigger).
    pub fn edge_type(self) -> Option<EdgeType> {
        match self {
            PatternRole::Trigger => None,
            PatternRole::Precursor => Some(EdgeType::Precursor),
            PatternRole::Evidence => Some(EdgeType::Evidence),
            PatternRole::Effect => Some(EdgeType::Effect),
            PatternRole::Absence => Some(EdgeType::Absence),
            PatternRole::Propagation => Some(EdgeType::Propagation),
        }
    }
}

/// How candidate events are matched to a trigger.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scope {
    /// Same (namespace, pod_name).
    Pod,
    /// Same node_name.
    Node,
    /// Pods consuming the trigger's ConfigMap in the given mode; for
    /// retrospective matching this means same (namespace, configmap_name).
    ConfigmapConsumers { mode: ConsumeMode },
}

/// One step of a pattern. The trigger step carries no window, confidence, or
/// scope; every other step carries all three.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PatternStep {
    pub event_type: EventType,
    pub role: PatternRole,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_seconds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scope: Option<Scope>,
}

impl PatternStep {
    fn trigger(event_type: EventType) -> Self {
        PatternStep {
            event_type,
            role: PatternRole::Trigger,
            window_seconds: None,
            confidence: None,
            scope: None,
        }
    }

    fn linked(
        event_type: EventType,
        role: PatternRole,
        window_seconds: u64,
        confidence: f64,
        scope: Scope,
    ) -> Self {
        PatternStep {
            event_type,
            role,
            window_seconds: Some(window_seconds),
            confidence: Some(confidence),
            scope: Some(scope),
        }
    }

    pub fn window_micros(&self) -> i64 {
        self.window_seconds.unwrap_or(0) as i64 * 1_000_000
    }
}

/// A declarative failure pattern: one trigger step plus linked steps.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PatternDefinition {
    pub pattern_id: String,
    pub description: String,
    pub steps: Vec<PatternStep>,
}

impl PatternDefinition {
    pub fn trigger(&self) -> &PatternStep {
        self.steps
            .iter()
            .find(|s| s.role == PatternRole::Trigger)
            .expect("validated patterns have a trigger step")
    }

    pub fn linked_steps(&self) -> impl Iterator<Item = &PatternStep> {
        self.steps.iter().filter(|s| s.role != PatternRole::Trigger)
    }

    pub fn validate(&self) -> Result<(), InvalidPattern> {
        let fail = |detail: &str| {
            Err(InvalidPattern { pattern_id: self.pattern_id.clone(), detail: detail.to_string() })
        };
        if self.pattern_id.is_empty() {
            return fail("empty pattern_id");
        }
        let triggers = self.steps.iter().filter(|s| s.role == PatternRole::Trigger).count();
        if triggers != 1 {
            return fail("exactly one trigger step required");
        }
        for step in self.linked_steps() {
            if step.window_seconds.unwrap_or(0) == 0 {
                return fail("linked steps need a positive window");
            }
            match step.confidence {
                Some(c) if c == 0.9 || c == 1.0 => {}
                _ => return fail("linked steps need confidence 0.9 or 1.0"),
            }
            if step.scope.is_none() {
                return fail("linked steps need a scope");
            }
            if step.event_type == self.trigger().event_type {
                return fail("linked step cannot share the trigger's event type");
            }
            if step.role == PatternRole::Absence
                && !matches!(step.scope, Some(Scope::ConfigmapConsumers { .. }))
            {
                return fail("absence steps resolve against configmap consumers");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidPattern {
    pub pattern_id: String,
    pub detail: String,
}

impl fmt::Display for InvalidPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid pattern {:?}: {}", self.pattern_id, self.detail)
    }
}

impl core::error::Error for InvalidPattern {}

/// The builtin pattern catalog.
pub fn builtin_patterns() -> Vec<PatternDefinition> {
    alloc::vec![
        PatternDefinition {
            pattern_id: "P001".into(),
            description: "OOMKill forensics: node pressure precursor, synchronous evidence \
                          capture, container termination effect"
                .into(),
            steps: alloc::vec![
                PatternStep::linked(
                    EventType::NodeMemoryPressure,
                    PatternRole::Precursor,
                    300,
                    0.9,
                    Scope::Node,
                ),
                PatternStep::trigger(EventType::OOMKill),
                PatternStep::linked(
                    EventType::OOMKillEvidence,
                    PatternRole::Evidence,
                    90,
                    1.0,
                    Scope::Pod,
                ),
                PatternStep::linked(
                    EventType::ContainerTerminated,
                    PatternRole::Effect,
                    10,
                    1.0,
                    Scope::Pod,
                ),
            ],
        },
        PatternDefinition {
            pattern_id: "P002".into(),
            description: "Silent misconfiguration: env-mode consumers that never restart \
                          after a ConfigMap change"
                .into(),
            steps: alloc::vec![
                PatternStep::trigger(EventType::ConfigMapChanged),
                PatternStep::linked(
                    EventType::PodNotRestarted,
                    PatternRole::Absence,
                    120,
                    1.0,
                    Scope::ConfigmapConsumers { mode: ConsumeMode::Env },
                ),
            ],
        },
        PatternDefinition {
            pattern_id: "P003".into(),
            description: "ConfigMap propagation: kubelet sync of volume-mode projections \
                          after a ConfigMap change"
                .into(),
            steps: alloc::vec![
                PatternStep::trigger(EventType::ConfigMapChanged),
                PatternStep::linked(
                    EventType::KubeletSync,
                    PatternRole::Propagation,
                    90,
                    1.0,
                    Scope::ConfigmapConsumers { mode: ConsumeMode::Volume },
                ),
            ],
        },
    ]
}

/// Latency class of an edge. The boundary reflects the bimodal construction
/// profile: same-capture-cycle edges land well under 100 ms of event time,
/// cross-cycle edges are dominated by restart intervals.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    IntraCycle,
    CrossCycle,
}

impl EdgeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeClass::IntraCycle => "intra_cycle",
            EdgeClass::CrossCycle => "cross_cycle",
        }
    }
}

impl fmt::Display for EdgeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classify an edge by its event-time delta: under 100 ms is intra-cycle,
/// 100 ms and above is cross-cycle.
pub fn classify_edge(event_time_delta_ms: i64) -> EdgeClass {
    if event_time_delta_ms < 100 {
        EdgeClass::IntraCycle
    } else {
        EdgeClass::CrossCycle
    }
}
