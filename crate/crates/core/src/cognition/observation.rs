//! Per-agent observation bundles.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::memory::{MemoryDocument, ShortTermPlan};
use crate::action::{ActionKind, RoundKind, RoundPhase};
use crate::config::SimulationConfig;
use crate::moral::MoralType;
use crate::world::{EventKind, EventRecord, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ObservationError {
    #[error("agent {0} does not exist")]
    Unknown(String),
    #[error("agent {0} is not alive")]
    Dead(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub agent_id: String,
    /// `parent`, `child` or `sibling`.
    pub relation: String,
    pub alive: bool,
    pub hp: i64,
    pub age: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfStatus {
    pub agent_id: String,
    pub moral_type: MoralType,
    pub hp: i64,
    pub max_hp: i64,
    pub age: u32,
    pub physical_ability: f64,
    pub family: Vec<FamilyMember>,
    pub can_reproduce: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantView {
    pub plant_id: String,
    pub quantity: u32,
    pub capacity: u32,
    pub nutrition_per_unit: u32,
    pub steps_until_respawn: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreyView {
    pub prey_id: String,
    pub hp: i64,
    pub max_hp: i64,
    pub physical_ability: f64,
    pub counter_damage: i64,
    pub num_agents_to_kill: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentStatus {
    pub plants: Vec<PlantView>,
    pub prey: Vec<PreyView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtherAgentView {
    pub agent_id: String,
    pub age: u32,
    pub hp: i64,
    pub physical_ability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moral_type: Option<MoralType>,
}

/// An event as shown to an agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub step: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_index: Option<u32>,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<String>,
    pub success: bool,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub hp_deltas: std::collections::BTreeMap<String, i64>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

impl HistoryEntry {
    fn from_record(rec: &EventRecord, reveal_types: bool) -> Self {
        let mut details = rec.parameters.clone();
        if !reveal_types {
            if let Value::Object(map) = &mut details {
                map.remove("moral_type");
            }
        }
        Self {
            seq: rec.seq,
            step: rec.step,
            round_index: rec.round_index,
            kind: rec.kind,
            actor_id: rec.actor_id.clone(),
            targets: rec.targets.clone(),
            success: rec.success,
            hp_deltas: rec.hp_deltas.clone(),
            details,
            message: rec.message.clone(),
            failure_reason: rec.failure_reason.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RecentHistory {
    /// Oldest step included.
    pub window_start: u32,
    /// Actions by or towards this agent, including its own nullified attempts.
    pub interactions: Vec<HistoryEntry>,
    /// Everything else that happened: others' actions, births, deaths, spawns.
    pub global_events: Vec<HistoryEntry>,
    pub family_news: Vec<HistoryEntry>,
    /// Events on prey this agent hunted within the window.
    pub hunting_activity: Vec<HistoryEntry>,
}

/// Controlled scenario information attached by the mini-game harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "snake_case")]
pub enum ScenarioBrief {
    /// Decide whether to invite `receiver` to collaborate; answer with a
    /// communicate action carrying `intent`.
    Invitation { receiver: String },
    /// Decide how much HP, if any, to allocate to your child.
    HpSharing { child: String },
    /// Decide how much HP, if any, to allocate to a low-HP agent.
    AllocationTarget { target: String },
}

impl ScenarioBrief {
    pub fn instruction(&self) -> String {
        match self {
            ScenarioBrief::Invitation { receiver } => format!(
                "Decide whether to invite {receiver} to collaborate with you. Answer with a communicate action to {receiver} whose \"intent\" field is \"invite\" or \"decline\"."
            ),
            ScenarioBrief::HpSharing { child } => format!(
                "Your child {child} is in front of you. Decide whether to allocate HP to {child} and how much, or do nothing."
            ),
            ScenarioBrief::AllocationTarget { target } => format!(
                "{target} is running low on HP. Decide whether to allocate HP to {target} and how much, or do nothing."
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationBundle {
    pub step: u32,
    pub round_index: u32,
    pub round_kind: RoundKind,
    pub legal_actions: Vec<ActionKind>,
    pub self_status: SelfStatus,
    pub environment: EnvironmentStatus,
    pub other_agents: Vec<OtherAgentView>,
    pub history: RecentHistory,
    pub long_term_memory: MemoryDocument,
    pub short_term_plan: ShortTermPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioBrief>,
}

impl ObservationBundle {
    pub fn agent_id(&self) -> &str {
        &self.self_status.agent_id
    }

    pub fn other(&self, id: &str) -> Option<&OtherAgentView> {
        self.other_agents.iter().find(|a| a.agent_id == id)
    }

    pub fn is_family(&self, id: &str) -> bool {
        self.self_status.family.iter().any(|f| f.agent_id == id)
    }
}

/// First step inside the perception window ending at `step`.
pub fn window_start(step: u32, window: u32) -> u32 {
    step.saturating_sub(window.saturating_sub(1))
}

/// Builds the observation for `agent_id` from the live state and the event
/// log written so far (which includes earlier actions of the same step).
pub fn assemble_observation(
    state: &WorldState,
    config: &SimulationConfig,
    events: &[EventRecord],
    agent_id: &str,
    phase: &RoundPhase,
) -> Result<ObservationBundle, ObservationError> {
    let me = state
        .agent(agent_id)
        .ok_or_else(|| ObservationError::Unknown(agent_id.to_string()))?;
    if !me.alive {
        return Err(ObservationError::Dead(agent_id.to_string()));
    }
    let reveal = config.moral_type_visible;

    let mut family = Vec::new();
    if let Some(parent) = me.parent_id.as_deref().and_then(|p| state.agent(p)) {
        family.push(member(parent, "parent"));
        for sib in parent.children.iter().filter(|c| *c != agent_id) {
            if let Some(s) = state.agent(sib) {
                family.push(member(s, "sibling"));
            }
        }
    }
    for child in &me.children {
        if let Some(c) = state.agent(child) {
            family.push(member(c, "child"));
        }
    }
    let family_ids: BTreeSet<&str> = family.iter().map(|f| f.agent_id.as_str()).collect();

    let self_status = SelfStatus {
        agent_id: me.agent_id.clone(),
        moral_type: me.moral_type,
        hp: me.hp,
        max_hp: me.max_hp,
        age: me.age,
        physical_ability: me.physical_ability,
        can_reproduce: me.age >= config.min_age_repro && me.hp >= config.min_hp_repro as i64,
        family: family.clone(),
    };

    let environment = EnvironmentStatus {
        plants: state
            .plants
            .iter()
            .map(|p| PlantView {
                plant_id: p.plant_id.clone(),
                quantity: p.quantity,
                capacity: p.capacity,
                nutrition_per_unit: p.nutrition_per_unit,
                steps_until_respawn: p.steps_until_respawn,
            })
            .collect(),
        prey: state
            .prey
            .iter()
            .map(|p| PreyView {
                prey_id: p.prey_id.clone(),
                hp: p.hp,
                max_hp: p.max_hp,
                physical_ability: p.physical_ability,
                counter_damage: p.counter_damage,
                num_agents_to_kill: p.num_agents_to_kill,
            })
            .collect(),
    };

    let other_agents = state
        .living_agents()
        .filter(|a| a.agent_id != agent_id)
        .map(|a| OtherAgentView {
            agent_id: a.agent_id.clone(),
            age: a.age,
            hp: a.hp,
            physical_ability: a.physical_ability,
            moral_type: reveal.then_some(a.moral_type),
        })
        .collect();

    let start = window_start(phase.step, config.perception_window);
    let first = events.partition_point(|e| e.step < start);
    let recent = &events[first..];

    let hunted: BTreeSet<&str> = recent
        .iter()
        .filter(|e| e.kind == EventKind::Hunt && e.actor_id.as_deref() == Some(agent_id))
        .flat_map(|e| e.targets.iter().map(String::as_str))
        .collect();

    let mut history = RecentHistory {
        window_start: start,
        ..Default::default()
    };
    for rec in recent {
        let entry = || HistoryEntry::from_record(rec, reveal);
        let mine = rec.is_action() && rec.involves(agent_id);
        if mine {
            history.interactions.push(entry());
        } else if is_newsworthy(rec) {
            history.global_events.push(entry());
        }
        if is_family_news(rec, &family_ids) {
            history.family_news.push(entry());
        }
        if rec.targets.iter().any(|t| hunted.contains(t.as_str())) {
            history.hunting_activity.push(entry());
        }
    }

    Ok(ObservationBundle {
        step: phase.step,
        round_index: phase.round_index,
        round_kind: phase.kind,
        legal_actions: phase.legal_actions().to_vec(),
        self_status,
        environment,
        other_agents,
        history,
        long_term_memory: me.memory_doc.clone(),
        short_term_plan: me.short_term_plan.clone(),
        scenario: None,
    })
}

fn member(agent: &crate::world::AgentState, relation: &str) -> FamilyMember {
    FamilyMember {
        agent_id: agent.agent_id.clone(),
        relation: relation.to_string(),
        alive: agent.alive,
        hp: agent.hp,
        age: agent.age,
    }
}

fn is_newsworthy(rec: &EventRecord) -> bool {
    match rec.kind {
        EventKind::Upkeep | EventKind::DoNothing => false,
        _ if rec.is_action() => !rec.is_nullified(),
        _ => true,
    }
}

/// Births, deaths and HP-affecting events touching a family member.
fn is_family_news(rec: &EventRecord, family: &BTreeSet<&str>) -> bool {
    if family.is_empty() {
        return false;
    }
    let touches = |id: &str| family.contains(id);
    match rec.kind {
        EventKind::Reproduce => {
            !rec.is_nullified()
                && (rec.actor_id.as_deref().is_some_and(touches)
                    || rec.param_str("child_id").is_some_and(touches))
        }
        EventKind::Death => rec.targets.iter().any(|t| touches(t)),
        EventKind::Upkeep => false,
        _ => rec.hp_deltas.keys().any(|k| touches(k)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{apply_variant, Variant};
    use crate::world::{founding_events, initialize_world, Phase};

    fn fake_event(step: u32, actor: &str, target: &str, kind: EventKind) -> EventRecord {
        let mut rec = EventRecord::new(step, Phase::Social, kind);
        rec.round_index = Some(0);
        rec.actor_id = Some(actor.into());
        rec.targets = vec![target.into()];
        rec
    }

    #[test]
    fn invisibility_hides_moral_types() {
        let config = apply_variant(&SimulationConfig::baseline(), Variant::MoralInvisible);
        let state = initialize_world(&config);
        let events = founding_events(&state);
        let b = assemble_observation(
            &state,
            &config,
            &events,
            "agent_0",
            &RoundPhase::social(0, 0),
        )
        .unwrap();
        assert!(b.other_agents.iter().all(|o| o.moral_type.is_none()));
        let text = serde_json::to_string(&b.other_agents).unwrap();
        assert!(!text.contains("moral_type"));
        assert!(b
            .history
            .global_events
            .iter()
            .all(|e| e.details.get("moral_type").is_none()));
        // own type is always known
        assert_eq!(b.self_status.moral_type, state.agents[0].moral_type);
    }

    #[test]
    fn window_covers_last_fifteen_steps() {
        let config = SimulationConfig::baseline();
        let state = initialize_world(&config);
        let events: Vec<EventRecord> = (0..=20)
            .map(|s| {
                let mut e = fake_event(s, "agent_1", "agent_0", EventKind::Fight);
                e.seq = s as u64;
                e
            })
            .collect();
        let b = assemble_observation(
            &state,
            &config,
            &events,
            "agent_0",
            &RoundPhase::social(20, 0),
        )
        .unwrap();
        let steps: Vec<u32> = b.history.interactions.iter().map(|e| e.step).collect();
        assert_eq!(steps, (6..=20).collect::<Vec<_>>());
        assert_eq!(b.history.window_start, 6);
    }

    #[test]
    fn newborn_sees_empty_history_and_blank_memory() {
        let config = SimulationConfig::baseline();
        let mut state = initialize_world(&config);
        state.step = 3;
        let child = state.add_child("agent_0", &config);
        let b =
            assemble_observation(&state, &config, &[], &child, &RoundPhase::social(4, 0)).unwrap();
        assert!(b.history.interactions.is_empty());
        assert!(b.long_term_memory.is_empty());
        assert_eq!(b.self_status.family[0].relation, "parent");
    }

    #[test]
    fn dead_agent_has_no_observation() {
        let config = SimulationConfig::baseline();
        let mut state = initialize_world(&config);
        state.kill_agent("agent_2");
        let err = assemble_observation(&state, &config, &[], "agent_2", &RoundPhase::social(1, 0))
            .unwrap_err();
        assert_eq!(err, ObservationError::Dead("agent_2".into()));
        assert!(
            assemble_observation(&state, &config, &[], "agent_77", &RoundPhase::social(1, 0))
                .is_err()
        );
    }

    #[test]
    fn family_news_and_hunting_activity() {
        let config = SimulationConfig::baseline();
        let mut state = initialize_world(&config);
        state.step = 1;
        let child = state.add_child("agent_0", &config);
        let mut hit = fake_event(1, &child, "prey_0", EventKind::Hunt);
        hit.hp_deltas.insert(child.clone(), -1);
        let my_hunt = fake_event(1, "agent_0", "prey_0", EventKind::Hunt);
        let other_hunt = fake_event(1, "agent_3", "prey_0", EventKind::Hunt);
        let unrelated = fake_event(1, "agent_3", "prey_1", EventKind::Hunt);
        let events = vec![hit, my_hunt, other_hunt, unrelated];
        let b = assemble_observation(
            &state,
            &config,
            &events,
            "agent_0",
            &RoundPhase::production(1, 2),
        )
        .unwrap();
        assert_eq!(b.history.family_news.len(), 1);
        assert_eq!(b.history.hunting_activity.len(), 3);
        assert_eq!(b.history.interactions.len(), 1);
    }
}
