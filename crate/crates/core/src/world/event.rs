//! Append-only event records. Every HP change in a run is carried by exactly
//! one record's `hp_deltas`, so trajectories can be rebuilt from the log alone.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::action::ActionKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Environment,
    Social,
    Production,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Environment => "environment",
            Phase::Social => "social",
            Phase::Production => "production",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Founder created at initialization.
    Spawn,
    PreySpawn,
    PlantRespawn,
    /// Per-step metabolic deduction for every living agent.
    Upkeep,
    Death,
    Collect,
    Hunt,
    Reproduce,
    Allocate,
    Communicate,
    Fight,
    Rob,
    DoNothing,
}

impl EventKind {
    pub fn action(self) -> Option<ActionKind> {
        Some(match self {
            EventKind::Collect => ActionKind::Collect,
            EventKind::Hunt => ActionKind::Hunt,
            EventKind::Reproduce => ActionKind::Reproduce,
            EventKind::Allocate => ActionKind::Allocate,
            EventKind::Communicate => ActionKind::Communicate,
            EventKind::Fight => ActionKind::Fight,
            EventKind::Rob => ActionKind::Rob,
            EventKind::DoNothing => ActionKind::DoNothing,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Spawn => "spawn",
            EventKind::PreySpawn => "prey_spawn",
            EventKind::PlantRespawn => "plant_respawn",
            EventKind::Upkeep => "upkeep",
            EventKind::Death => "death",
            EventKind::Collect => "collect",
            EventKind::Hunt => "hunt",
            EventKind::Reproduce => "reproduce",
            EventKind::Allocate => "allocate",
            EventKind::Communicate => "communicate",
            EventKind::Fight => "fight",
            EventKind::Rob => "rob",
            EventKind::DoNothing => "do_nothing",
        }
    }
}

impl From<ActionKind> for EventKind {
    fn from(kind: ActionKind) -> Self {
        match kind {
            ActionKind::Collect => EventKind::Collect,
            ActionKind::Hunt => EventKind::Hunt,
            ActionKind::Reproduce => EventKind::Reproduce,
            ActionKind::Allocate => EventKind::Allocate,
            ActionKind::Communicate => EventKind::Communicate,
            ActionKind::Fight => EventKind::Fight,
            ActionKind::Rob => EventKind::Rob,
            ActionKind::DoNothing => EventKind::DoNothing,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One Bernoulli trial consumed while resolving an action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub probability: f64,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Position in the run's log, starting at 0.
    pub seq: u64,
    pub step: u32,
    /// Round within the step; absent for environment events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_index: Option<u32>,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_id: Option<String>,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub parameters: Value,
    pub success: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hp_deltas: BTreeMap<String, i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Set when the action was nullified by validation; nullified actions
    /// change nothing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub draws: Vec<Draw>,
}

impl EventRecord {
    pub fn new(step: u32, phase: Phase, kind: EventKind) -> Self {
        Self {
            seq: 0,
            step,
            round_index: None,
            phase,
            actor_id: None,
            kind,
            targets: Vec::new(),
            parameters: Value::Null,
            success: true,
            hp_deltas: BTreeMap::new(),
            message: None,
            failure_reason: None,
            draws: Vec::new(),
        }
    }

    pub fn is_action(&self) -> bool {
        self.kind.action().is_some()
    }

    pub fn is_nullified(&self) -> bool {
        self.failure_reason.is_some()
    }

    /// True when `id` is the actor or one of the targets.
    pub fn involves(&self, id: &str) -> bool {
        self.actor_id.as_deref() == Some(id) || self.targets.iter().any(|t| t == id)
    }

    pub fn param_str(&self, key: &str) -> Option<&str> {
        self.parameters.get(key).and_then(Value::as_str)
    }

    pub fn param_i64(&self, key: &str) -> Option<i64> {
        self.parameters.get(key).and_then(Value::as_i64)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

/// Parses an events.jsonl document.
pub fn parse_event_lines(text: &str) -> Result<Vec<EventRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
