//! Metrics derived from a run's event log, and the report writer.
//!
//! Every function here reads events only; the engine is never consulted.

mod actions;
mod hp;
mod judge;
mod networks;
mod population;
mod report;

pub use actions::{compute_action_distributions, ActionDistributions, TypeActions};
pub use hp::{compute_hp_attribution, reconcile_final_hp, AgentTrajectory, HpAttribution, HpFlow, TrajectoryPoint};
pub use judge::{
    behavior_digest, judge_moral_types, JudgeError, JudgeOutcome, JudgedRow, LlmJudge, MoralJudge, OneHotJudge,
    SoftConfusionMatrix, UniformJudge, DEFAULT_DIGEST_BYTES,
};
pub use networks::{
    build_networks, compute_hunt_traces, CommunicationEdge, CommunicationGraph, GraphNode, HuntTrace, LineageGraph,
    TransferShare, DEFAULT_HUNT_WINDOW,
};
pub use population::{compute_lifespans, compute_population_series, LifespanEntry, Lifespans, PopulationPoint, PopulationSeries};
pub use report::{emit_report, notable_agents, ReportBundle, ReportError, ReportOptions};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::moral::MoralType;
use crate::world::{EventKind, EventRecord};

/// What the log says about one agent's life.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent_id: String,
    pub moral_type: MoralType,
    pub parent_id: Option<String>,
    pub birth_step: u32,
    pub death_step: Option<u32>,
    pub death_cause: Option<String>,
}

impl AgentRecord {
    pub fn is_founder(&self) -> bool {
        self.parent_id.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("event {seq}: {reason}")]
    Corrupt { seq: u64, reason: String },
}

/// Agents keyed by id, built from spawn, reproduce and death records.
pub fn agent_roster(events: &[EventRecord]) -> Result<BTreeMap<String, AgentRecord>, AnalysisError> {
    let corrupt = |e: &EventRecord, reason: &str| AnalysisError::Corrupt {
        seq: e.seq,
        reason: reason.to_string(),
    };
    let mut roster = BTreeMap::new();
    for e in events {
        match e.kind {
            EventKind::Spawn => {
                let id = e.targets.first().ok_or_else(|| corrupt(e, "spawn without target"))?;
                let moral_type = moral_param(e).ok_or_else(|| corrupt(e, "spawn without moral type"))?;
                roster.insert(
                    id.clone(),
                    AgentRecord {
                        agent_id: id.clone(),
                        moral_type,
                        parent_id: None,
                        birth_step: e.step,
                        death_step: None,
                        death_cause: None,
                    },
                );
            }
            EventKind::Reproduce if !e.is_nullified() => {
                let child = e.param_str("child_id").ok_or_else(|| corrupt(e, "birth without child id"))?;
                let moral_type = moral_param(e).ok_or_else(|| corrupt(e, "birth without moral type"))?;
                roster.insert(
                    child.to_string(),
                    AgentRecord {
                        agent_id: child.to_string(),
                        moral_type,
                        parent_id: e.actor_id.clone(),
                        birth_step: e.step,
                        death_step: None,
                        death_cause: None,
                    },
                );
            }
            EventKind::Death => {
                let id = e.targets.first().ok_or_else(|| corrupt(e, "death without target"))?;
                let rec = roster.get_mut(id).ok_or_else(|| corrupt(e, "death of unknown agent"))?;
                if rec.death_step.is_some() {
                    return Err(corrupt(e, "agent died twice"));
                }
                rec.death_step = Some(e.step);
                rec.death_cause = e.param_str("cause").map(str::to_string);
            }
            _ => {}
        }
    }
    Ok(roster)
}

fn moral_param(e: &EventRecord) -> Option<MoralType> {
    e.parameters
        .get("moral_type")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
}

/// Last step present in the log.
pub fn final_step(events: &[EventRecord]) -> u32 {
    events.iter().map(|e| e.step).max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub description: String,
}

impl Column {
    pub fn new(name: &str, description: &str) -> Self {
        Self {
            name: name.to_string(),
            description: description.to_string(),
        }
    }
}

/// On-disk envelope for one metric: column metadata plus typed data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricFile<T> {
    pub metric: String,
    pub columns: Vec<Column>,
    pub data: T,
}

impl<T: Serialize> MetricFile<T> {
    pub fn new(metric: &str, columns: Vec<Column>, data: T) -> Self {
        Self {
            metric: metric.to_string(),
            columns,
            data,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric serializes")
    }
}

/// Per-type map with every type present, zero-initialised.
pub(crate) fn per_type<T: Default>() -> BTreeMap<MoralType, T> {
    MoralType::ALL.iter().map(|t| (*t, T::default())).collect()
}
