use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{agent_roster, per_type, AnalysisError};
use crate::action::ActionKind;
use crate::moral::MoralType;
use crate::world::EventRecord;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeActions {
    /// Agents of this type that ever lived.
    pub agents: u32,
    pub initiated: BTreeMap<ActionKind, u64>,
    pub received: BTreeMap<ActionKind, u64>,
    pub mean_initiated: BTreeMap<ActionKind, f64>,
    pub mean_received: BTreeMap<ActionKind, f64>,
    /// Share of each kind among this type's initiated actions.
    pub initiated_proportions: BTreeMap<ActionKind, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDistributions {
    pub per_type: BTreeMap<MoralType, TypeActions>,
    /// Executed actions of each kind across the run.
    pub totals: BTreeMap<ActionKind, u64>,
    /// Actions rejected at resolution.
    pub nullified: BTreeMap<ActionKind, u64>,
}

/// Counts executed actions by the actor's type, and receipts by each agent
/// target's type. Nullified actions are counted apart.
pub fn compute_action_distributions(events: &[EventRecord]) -> Result<ActionDistributions, AnalysisError> {
    let roster = agent_roster(events)?;
    let mut per_type = per_type::<TypeActions>();
    for a in roster.values() {
        per_type.get_mut(&a.moral_type).expect("all types").agents += 1;
    }
    let mut totals = BTreeMap::new();
    let mut nullified = BTreeMap::new();
    for e in events {
        let Some(kind) = e.kind.action() else { continue };
        if e.is_nullified() {
            *nullified.entry(kind).or_insert(0) += 1;
            continue;
        }
        *totals.entry(kind).or_insert(0) += 1;
        if let Some(actor) = e.actor_id.as_ref().and_then(|id| roster.get(id)) {
            let row = per_type.get_mut(&actor.moral_type).expect("all types");
            *row.initiated.entry(kind).or_insert(0) += 1;
        }
        for t in &e.targets {
            if let Some(target) = roster.get(t) {
                let row = per_type.get_mut(&target.moral_type).expect("all types");
                *row.received.entry(kind).or_insert(0) += 1;
            }
        }
    }
    for row in per_type.values_mut() {
        let n = row.agents.max(1) as f64;
        row.mean_initiated = row.initiated.iter().map(|(k, c)| (*k, *c as f64 / n)).collect();
        row.mean_received = row.received.iter().map(|(k, c)| (*k, *c as f64 / n)).collect();
        let all: u64 = row.initiated.values().sum();
        if all > 0 {
            row.initiated_proportions = row
                .initiated
                .iter()
                .map(|(k, c)| (*k, *c as f64 / all as f64))
                .collect();
        }
    }
    Ok(ActionDistributions {
        per_type,
        totals,
        nullified,
    })
}
