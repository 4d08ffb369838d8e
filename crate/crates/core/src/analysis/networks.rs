use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{agent_roster, AnalysisError};
use crate::moral::MoralType;
use crate::world::{EventKind, EventRecord};

/// Steps after a kill during which the hunters' allocations count as sharing
/// the catch.
pub const DEFAULT_HUNT_WINDOW: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub agent_id: String,
    pub moral_type: MoralType,
    pub birth_step: u32,
    pub death_step: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineageGraph {
    pub nodes: Vec<GraphNode>,
    /// (parent, child)
    pub edges: Vec<(String, String)>,
}

impl LineageGraph {
    /// Every node has at most one parent and following parents never loops.
    pub fn is_forest(&self) -> bool {
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        for (p, c) in &self.edges {
            if parent.insert(c, p).is_some() {
                return false;
            }
        }
        for start in parent.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = *start;
            while let Some(p) = parent.get(cur) {
                if !seen.insert(cur) {
                    return false;
                }
                cur = p;
            }
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicationEdge {
    pub from: String,
    pub to: String,
    /// Delivered messages.
    pub weight: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunicationGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<CommunicationEdge>,
}

pub fn build_networks(events: &[EventRecord]) -> Result<(LineageGraph, CommunicationGraph), AnalysisError> {
    let roster = agent_roster(events)?;
    let nodes: Vec<GraphNode> = roster
        .values()
        .map(|a| GraphNode {
            agent_id: a.agent_id.clone(),
            moral_type: a.moral_type,
            birth_step: a.birth_step,
            death_step: a.death_step,
        })
        .collect();
    let edges = roster
        .values()
        .filter_map(|a| a.parent_id.clone().map(|p| (p, a.agent_id.clone())))
        .collect();
    let mut weights: BTreeMap<(String, String), u64> = BTreeMap::new();
    for e in events {
        if e.kind != EventKind::Communicate || e.is_nullified() {
            continue;
        }
        let Some(from) = &e.actor_id else { continue };
        for to in &e.targets {
            *weights.entry((from.clone(), to.clone())).or_insert(0) += 1;
        }
    }
    let comm = CommunicationGraph {
        nodes: nodes.clone(),
        edges: weights
            .into_iter()
            .map(|((from, to), weight)| CommunicationEdge { from, to, weight })
            .collect(),
    };
    Ok((LineageGraph { nodes, edges }, comm))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferShare {
    pub step: u32,
    pub seq: u64,
    pub from: String,
    pub to: String,
    pub amount: i64,
}

/// How one prey was brought down and what its hunters gave away afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuntTrace {
    pub prey_id: String,
    pub prey_max_hp: i64,
    pub kill_step: u32,
    pub kill_seq: u64,
    pub killer: String,
    /// HP removed from the prey by each hunter.
    pub damage: BTreeMap<String, i64>,
    pub total_damage: i64,
    pub transfers: Vec<TransferShare>,
}

/// One trace per killed prey, in kill order. Transfers are allocations made
/// by any of the prey's hunters after the kill and within `window` steps.
pub fn compute_hunt_traces(events: &[EventRecord], window: u32) -> Vec<HuntTrace> {
    let mut damage: BTreeMap<&str, BTreeMap<String, i64>> = BTreeMap::new();
    let mut traces = Vec::new();
    for e in events {
        if e.kind != EventKind::Hunt || e.is_nullified() {
            continue;
        }
        let (Some(hunter), Some(prey)) = (&e.actor_id, e.targets.first()) else { continue };
        let dealt = -e.hp_deltas.get(prey).copied().unwrap_or(0);
        if dealt > 0 {
            *damage.entry(prey).or_default().entry(hunter.clone()).or_insert(0) += dealt;
        }
        if e.parameters.get("killed").and_then(|v| v.as_bool()) == Some(true) {
            let shares = damage.remove(prey.as_str()).unwrap_or_default();
            traces.push(HuntTrace {
                prey_id: prey.clone(),
                prey_max_hp: e.param_i64("prey_max_hp").unwrap_or(0),
                kill_step: e.step,
                kill_seq: e.seq,
                killer: hunter.clone(),
                total_damage: shares.values().sum(),
                damage: shares,
                transfers: Vec::new(),
            });
        }
    }
    for trace in &mut traces {
        let hunters: BTreeSet<&String> = trace.damage.keys().collect();
        let later = events
            .iter()
            .filter(|e| e.seq > trace.kill_seq && e.step <= trace.kill_step + window)
            .filter(|e| e.kind == EventKind::Allocate && !e.is_nullified());
        let mut found = Vec::new();
        for e in later {
            let Some(from) = e.actor_id.as_ref().filter(|a| hunters.contains(a)) else { continue };
            for to in &e.targets {
                if let Some(amount) = e.hp_deltas.get(to).filter(|d| **d > 0) {
                    found.push(TransferShare {
                        step: e.step,
                        seq: e.seq,
                        from: from.clone(),
                        to: to.clone(),
                        amount: *amount,
                    });
                }
            }
        }
        trace.transfers = found;
    }
    traces
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::scripted_run;
    use super::*;

    #[test]
    fn lineage_is_a_forest_and_matches_births() {
        let archive = scripted_run(42, 60);
        let (lineage, comm) = build_networks(&archive.events).unwrap();
        assert!(lineage.is_forest());
        let births = archive
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Reproduce && !e.is_nullified())
            .count();
        assert_eq!(lineage.edges.len(), births);
        let messages: u64 = archive
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Communicate && !e.is_nullified())
            .map(|e| e.targets.len() as u64)
            .sum();
        assert_eq!(comm.edges.iter().map(|e| e.weight).sum::<u64>(), messages);
    }

    #[test]
    fn cycle_is_not_a_forest() {
        let g = LineageGraph {
            nodes: vec![],
            edges: vec![("a".into(), "b".into()), ("b".into(), "a".into())],
        };
        assert!(!g.is_forest());
    }

    #[test]
    fn damage_shares_reconcile_with_prey_hp() {
        let mut found = false;
        for seed in [1, 2, 42] {
            let archive = scripted_run(seed, 60);
            for t in compute_hunt_traces(&archive.events, DEFAULT_HUNT_WINDOW) {
                found = true;
                assert_eq!(t.total_damage, t.prey_max_hp, "{}", t.prey_id);
                assert!(t.damage.contains_key(&t.killer));
            }
        }
        assert!(found, "no prey was killed");
    }
}
