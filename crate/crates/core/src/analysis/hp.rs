use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{agent_roster, AnalysisError};
use crate::moral::MoralType;
use crate::world::{EventKind, EventRecord, WorldState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HpFlow {
    pub gain: i64,
    /// Positive number.
    pub loss: i64,
    pub events: u64,
}

impl HpFlow {
    fn add(&mut self, delta: i64) {
        if delta > 0 {
            self.gain += delta;
        } else {
            self.loss -= delta;
        }
        self.events += 1;
    }

    pub fn net(&self) -> i64 {
        self.gain - self.loss
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: u32,
    pub seq: u64,
    /// Event kind that moved the HP; `birth` for a newborn's endowment.
    pub cause: String,
    pub delta: i64,
    pub hp: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentTrajectory {
    pub agent_id: String,
    pub moral_type: MoralType,
    pub points: Vec<TrajectoryPoint>,
}

impl AgentTrajectory {
    pub fn final_hp(&self) -> i64 {
        self.points.last().map_or(0, |p| p.hp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpAttribution {
    /// Cause -> flow over all agents.
    pub by_cause: BTreeMap<String, HpFlow>,
    /// Moral type of the affected agent -> cause -> flow.
    pub by_type: BTreeMap<MoralType, BTreeMap<String, HpFlow>>,
    pub trajectories: Vec<AgentTrajectory>,
}

fn cause_label(e: &EventRecord, id: &str) -> String {
    match e.kind {
        EventKind::Reproduce if e.param_str("child_id") == Some(id) => "birth".to_string(),
        kind => kind.as_str().to_string(),
    }
}

/// Rebuilds every agent's HP from the deltas in the log. Spawn records carry
/// the initial HP, so the running sum is the agent's HP after each event.
pub fn compute_hp_attribution(events: &[EventRecord]) -> Result<HpAttribution, AnalysisError> {
    let roster = agent_roster(events)?;
    let mut by_cause: BTreeMap<String, HpFlow> = BTreeMap::new();
    let mut by_type: BTreeMap<MoralType, BTreeMap<String, HpFlow>> = BTreeMap::new();
    let mut trajectories: BTreeMap<&str, AgentTrajectory> = roster
        .values()
        .map(|a| {
            (
                a.agent_id.as_str(),
                AgentTrajectory {
                    agent_id: a.agent_id.clone(),
                    moral_type: a.moral_type,
                    points: Vec::new(),
                },
            )
        })
        .collect();
    for e in events {
        for (id, delta) in &e.hp_deltas {
            let Some(traj) = trajectories.get_mut(id.as_str()) else { continue };
            let cause = cause_label(e, id);
            let hp = traj.final_hp() + delta;
            if e.kind != EventKind::Spawn && cause != "birth" {
                by_cause.entry(cause.clone()).or_default().add(*delta);
                by_type
                    .entry(traj.moral_type)
                    .or_default()
                    .entry(cause.clone())
                    .or_default()
                    .add(*delta);
            }
            traj.points.push(TrajectoryPoint {
                step: e.step,
                seq: e.seq,
                cause,
                delta: *delta,
                hp,
            });
        }
    }
    Ok(HpAttribution {
        by_cause,
        by_type,
        trajectories: trajectories.into_values().collect(),
    })
}

/// Agents whose rebuilt final HP differs from `state`, with both values.
pub fn reconcile_final_hp(attribution: &HpAttribution, state: &WorldState) -> Vec<(String, i64, i64)> {
    let mut mismatches = Vec::new();
    for t in &attribution.trajectories {
        let actual = state.agent(&t.agent_id).map_or(i64::MIN, |a| a.hp);
        if actual != t.final_hp() {
            mismatches.push((t.agent_id.clone(), t.final_hp(), actual));
        }
    }
    for a in &state.agents {
        if !attribution.trajectories.iter().any(|t| t.agent_id == a.agent_id) {
            mismatches.push((a.agent_id.clone(), i64::MIN, a.hp));
        }
    }
    mismatches
}
