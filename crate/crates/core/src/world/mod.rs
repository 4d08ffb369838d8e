//! The authoritative simulation state and its environment dynamics.
//!
//! Resources and agents share no spatial layout: every living agent can
//! reach every plant, prey and other agent.

mod checkpoint;
mod event;

pub use checkpoint::{restore, snapshot, Checkpoint, CheckpointError};
pub use event::{parse_event_lines, Draw, EventKind, EventRecord, Phase};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cognition::memory::{MemoryDocument, ShortTermPlan};
use crate::config::SimulationConfig;
use crate::moral::MoralType;
use crate::rng::SimRng;

pub fn agent_id(n: usize) -> String {
    format!("agent_{n}")
}

fn parse_index(id: &str, prefix: &str) -> Option<usize> {
    id.strip_prefix(prefix)?.parse().ok()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub agent_id: String,
    pub moral_type: MoralType,
    pub hp: i64,
    pub max_hp: i64,
    pub age: u32,
    pub physical_ability: f64,
    pub parent_id: Option<String>,
    pub children: Vec<String>,
    pub alive: bool,
    pub memory_doc: MemoryDocument,
    pub short_term_plan: ShortTermPlan,
    pub birth_step: u32,
    pub death_step: Option<u32>,
}

impl AgentState {
    /// Integer damage dealt by this agent on a successful hit.
    pub fn damage(&self) -> i64 {
        self.physical_ability.floor().max(0.0) as i64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantNode {
    pub plant_id: String,
    pub quantity: u32,
    pub capacity: u32,
    pub nutrition_per_unit: u32,
    pub respawn_delay: u32,
    /// Zero unless the plant is depleted and waiting to respawn.
    pub steps_until_respawn: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreyAnimal {
    pub prey_id: String,
    pub hp: i64,
    pub max_hp: i64,
    pub physical_ability: f64,
    pub counter_damage: i64,
    /// Prompt hint only; never used by the mechanics.
    pub num_agents_to_kill: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Last started step; 0 right after initialization.
    pub step: u32,
    /// Every agent ever created, indexed by the numeric part of its id.
    pub agents: Vec<AgentState>,
    pub plants: Vec<PlantNode>,
    /// Living prey only.
    pub prey: Vec<PreyAnimal>,
    pub next_prey_serial: u32,
    /// Execution order for the current step.
    pub queue: Vec<String>,
    pub rng: SimRng,
}

impl WorldState {
    pub fn agent(&self, id: &str) -> Option<&AgentState> {
        let idx = parse_index(id, "agent_")?;
        self.agents.get(idx).filter(|a| a.agent_id == id)
    }

    pub fn agent_mut(&mut self, id: &str) -> Option<&mut AgentState> {
        let idx = parse_index(id, "agent_")?;
        self.agents.get_mut(idx).filter(|a| a.agent_id == id)
    }

    pub fn living_agent(&self, id: &str) -> Option<&AgentState> {
        self.agent(id).filter(|a| a.alive)
    }

    pub fn living_agents(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().filter(|a| a.alive)
    }

    pub fn living_count(&self) -> usize {
        self.living_agents().count()
    }

    pub fn prey(&self, id: &str) -> Option<&PreyAnimal> {
        self.prey.iter().find(|p| p.prey_id == id)
    }

    pub fn prey_mut(&mut self, id: &str) -> Option<&mut PreyAnimal> {
        self.prey.iter_mut().find(|p| p.prey_id == id)
    }

    pub fn plant(&self, id: &str) -> Option<&PlantNode> {
        let idx = parse_index(id, "plant_")?;
        self.plants.get(idx).filter(|p| p.plant_id == id)
    }

    pub fn plant_mut(&mut self, id: &str) -> Option<&mut PlantNode> {
        let idx = parse_index(id, "plant_")?;
        self.plants.get_mut(idx).filter(|p| p.plant_id == id)
    }

    /// HP of any agent or prey; plants and unknown ids have none. Removed
    /// prey and dead agents report 0.
    pub fn entity_hp(&self, id: &str) -> i64 {
        if let Some(a) = self.agent(id) {
            return a.hp;
        }
        self.prey(id).map(|p| p.hp).unwrap_or(0)
    }

    /// Parent, children and siblings.
    pub fn family_of(&self, id: &str) -> Vec<String> {
        let Some(agent) = self.agent(id) else {
            return Vec::new();
        };
        let mut family = Vec::new();
        if let Some(parent_id) = &agent.parent_id {
            family.push(parent_id.clone());
            if let Some(parent) = self.agent(parent_id) {
                family.extend(parent.children.iter().filter(|c| *c != id).cloned());
            }
        }
        family.extend(agent.children.iter().cloned());
        family
    }

    /// Marks an agent dead with zero HP. Returns false if it already was.
    pub fn kill_agent(&mut self, id: &str) -> bool {
        let step = self.step;
        match self.agent_mut(id) {
            Some(agent) if agent.alive => {
                agent.alive = false;
                agent.hp = 0;
                agent.death_step = Some(step);
                true
            }
            _ => false,
        }
    }

    /// Creates a newborn of `parent_id` and returns its id. The child's
    /// physical ability is drawn from the world generator.
    pub fn add_child(&mut self, parent_id: &str, config: &SimulationConfig) -> String {
        let id = agent_id(self.agents.len());
        let moral_type = self.agent(parent_id).expect("parent exists").moral_type;
        let pa = self.rng.gaussian(config.pa_mean, config.pa_std);
        self.agents.push(AgentState {
            agent_id: id.clone(),
            moral_type,
            hp: config.offspring_hp as i64,
            max_hp: config.max_hp as i64,
            age: 0,
            physical_ability: pa,
            parent_id: Some(parent_id.to_string()),
            children: Vec::new(),
            alive: true,
            memory_doc: MemoryDocument::default(),
            short_term_plan: ShortTermPlan::default(),
            birth_step: self.step,
            death_step: None,
        });
        self.agent_mut(parent_id)
            .expect("parent exists")
            .children
            .push(id.clone());
        id
    }

    fn spawn_prey(&mut self, config: &SimulationConfig) -> &PreyAnimal {
        let params = &config.prey_params;
        let base = self.rng.gaussian(params.hp_mean, params.hp_std);
        let max_hp = ((base * params.difficulty).round() as i64).max(1);
        let prey = PreyAnimal {
            prey_id: format!("prey_{}", self.next_prey_serial),
            hp: max_hp,
            max_hp,
            physical_ability: params.physical_ability,
            counter_damage: params.counter_damage as i64,
            num_agents_to_kill: config.num_agents_to_kill(max_hp),
        };
        self.next_prey_serial += 1;
        self.prey.push(prey);
        self.prey.last().expect("just pushed")
    }

    /// Reshuffles the execution queue over living agents.
    pub fn shuffle_queue(&mut self) {
        let mut queue: Vec<String> = self.living_agents().map(|a| a.agent_id.clone()).collect();
        self.rng.shuffle(&mut queue);
        self.queue = queue;
    }
}

/// Builds the step-0 world: founders, plants and prey.
pub fn initialize_world(config: &SimulationConfig) -> WorldState {
    let mut rng = SimRng::seed_from(config.rng_seed);
    let types = config.founder_types();

    let mut queue: Vec<String> = (0..types.len()).map(agent_id).collect();
    rng.shuffle(&mut queue);

    let agents = types
        .iter()
        .enumerate()
        .map(|(n, ty)| AgentState {
            agent_id: agent_id(n),
            moral_type: *ty,
            hp: config.initial_hp as i64,
            max_hp: config.max_hp as i64,
            age: config.initial_age,
            physical_ability: rng.gaussian(config.pa_mean, config.pa_std),
            parent_id: None,
            children: Vec::new(),
            alive: true,
            memory_doc: MemoryDocument::default(),
            short_term_plan: ShortTermPlan::default(),
            birth_step: 0,
            death_step: None,
        })
        .collect();

    let plants = (0..config.plant_node_count())
        .map(|i| PlantNode {
            plant_id: format!("plant_{i}"),
            quantity: config.plant_params.initial_quantity,
            capacity: config.plant_params.capacity,
            nutrition_per_unit: config.plant_params.nutrition,
            respawn_delay: config.plant_params.respawn_delay,
            steps_until_respawn: 0,
        })
        .collect();

    let mut state = WorldState {
        step: 0,
        agents,
        plants,
        prey: Vec::new(),
        next_prey_serial: 0,
        queue,
        rng,
    };
    for _ in 0..config.initial_prey_count() {
        state.spawn_prey(config);
    }
    state
}

/// Step-0 records for founders and initial prey, so that every metric can be
/// derived from the event log alone.
pub fn founding_events(state: &WorldState) -> Vec<EventRecord> {
    let mut events = Vec::new();
    for agent in &state.agents {
        let mut rec = EventRecord::new(0, Phase::Environment, EventKind::Spawn);
        rec.targets.push(agent.agent_id.clone());
        rec.parameters = json!({
            "moral_type": agent.moral_type,
            "age": agent.age,
            "physical_ability": agent.physical_ability,
        });
        rec.hp_deltas.insert(agent.agent_id.clone(), agent.hp);
        events.push(rec);
    }
    for prey in &state.prey {
        events.push(prey_spawn_record(0, prey));
    }
    events
}

fn prey_spawn_record(step: u32, prey: &PreyAnimal) -> EventRecord {
    let mut rec = EventRecord::new(step, Phase::Environment, EventKind::PreySpawn);
    rec.targets.push(prey.prey_id.clone());
    rec.parameters = json!({
        "max_hp": prey.max_hp,
        "physical_ability": prey.physical_ability,
        "counter_damage": prey.counter_damage,
    });
    rec.hp_deltas.insert(prey.prey_id.clone(), prey.hp);
    rec
}

/// Death record for an agent already marked dead. `hp_lost` is the HP it
/// still had when it died (non-zero only for old age).
pub fn death_record(step: u32, agent: &str, cause: &str, hp_lost: i64) -> EventRecord {
    let mut rec = EventRecord::new(step, Phase::Environment, EventKind::Death);
    rec.targets.push(agent.to_string());
    rec.parameters = json!({ "cause": cause });
    if hp_lost != 0 {
        rec.hp_deltas.insert(agent.to_string(), -hp_lost);
    }
    rec
}

/// Start-of-step environment update, in this order: plant lifecycle, prey
/// spawning, removal of dead prey, metabolic cost, aging and deaths.
/// `state.step` must already hold the new step number.
pub fn environment_update(state: &mut WorldState, config: &SimulationConfig) -> Vec<EventRecord> {
    let step = state.step;
    let mut events = Vec::new();

    for plant in &mut state.plants {
        if plant.steps_until_respawn > 0 {
            plant.steps_until_respawn -= 1;
            if plant.steps_until_respawn == 0 {
                plant.quantity = plant.capacity;
                let mut rec = EventRecord::new(step, Phase::Environment, EventKind::PlantRespawn);
                rec.targets.push(plant.plant_id.clone());
                rec.parameters = json!({ "quantity": plant.quantity });
                events.push(rec);
            }
        } else if plant.quantity < plant.capacity {
            plant.quantity += 1;
        }
    }

    let max_prey = config.max_prey_count() as usize;
    let empty_slots = max_prey.saturating_sub(state.prey.len());
    for _ in 0..empty_slots {
        if state.prey.len() >= max_prey {
            break;
        }
        if state.rng.bernoulli(config.prey_params.respawn_rate) {
            let prey = state.spawn_prey(config).clone();
            events.push(prey_spawn_record(step, &prey));
        }
    }

    state.prey.retain(|p| p.hp > 0);

    let cost = config.metabolic_cost_per_step as i64;
    let mut upkeep = EventRecord::new(step, Phase::Environment, EventKind::Upkeep);
    upkeep.parameters = json!({ "metabolic_cost": cost });
    for agent in state.agents.iter_mut().filter(|a| a.alive) {
        let paid = cost.min(agent.hp);
        agent.hp -= paid;
        agent.age += 1;
        if paid != 0 {
            upkeep.hp_deltas.insert(agent.agent_id.clone(), -paid);
        }
    }
    if !upkeep.hp_deltas.is_empty() {
        events.push(upkeep);
    }

    let dying: Vec<(String, &'static str, i64)> = state
        .agents
        .iter()
        .filter(|a| a.alive)
        .filter_map(|a| {
            if a.hp <= 0 {
                Some((a.agent_id.clone(), "starvation", 0))
            } else if a.age > config.max_age {
                Some((a.agent_id.clone(), "old_age", a.hp))
            } else {
                None
            }
        })
        .collect();
    for (id, cause, hp_lost) in dying {
        state.kill_agent(&id);
        events.push(death_record(step, &id, cause, hp_lost));
    }

    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{apply_variant, Variant};

    fn baseline() -> SimulationConfig {
        SimulationConfig::baseline()
    }

    #[test]
    fn baseline_initialization() {
        let config = baseline();
        let state = initialize_world(&config);
        assert_eq!(state.agents.len(), 8);
        for ty in MoralType::ALL {
            assert_eq!(
                state.agents.iter().filter(|a| a.moral_type == ty).count(),
                2
            );
        }
        for a in &state.agents {
            assert_eq!(a.hp, 20);
            assert_eq!(a.age, 10);
            assert_eq!(a.physical_ability, 6.0);
            assert!(a.parent_id.is_none());
            assert!(a.children.is_empty());
        }
        assert_eq!(state.plants.len(), 8);
        assert_eq!(state.prey.len(), 8);
        let mut sorted = state.queue.clone();
        sorted.sort();
        let mut ids: Vec<String> = (0..8).map(agent_id).collect();
        ids.sort();
        assert_eq!(sorted, ids);
    }

    #[test]
    fn single_type_initialization() {
        let config = apply_variant(&baseline(), Variant::SingleType(MoralType::Selfish));
        let state = initialize_world(&config);
        assert!(state
            .agents
            .iter()
            .all(|a| a.moral_type == MoralType::Selfish));
    }

    #[test]
    fn plant_respawns_after_delay() {
        let config = baseline();
        let mut state = initialize_world(&config);
        state.plants[0].quantity = 0;
        state.plants[0].steps_until_respawn = 1;
        state.plants[1].quantity = 1;
        state.step = 1;
        let events = environment_update(&mut state, &config);
        assert_eq!(state.plants[0].quantity, 3);
        assert_eq!(state.plants[0].steps_until_respawn, 0);
        assert_eq!(state.plants[1].quantity, 2);
        // initial quantity above capacity does not grow further
        assert_eq!(state.plants[2].quantity, 4);
        assert!(events.iter().any(|e| e.kind == EventKind::PlantRespawn));
    }

    #[test]
    fn metabolic_cost_kills_at_one_hp() {
        let config = baseline();
        let mut state = initialize_world(&config);
        state.agents[0].hp = 1;
        state.step = 1;
        let events = environment_update(&mut state, &config);
        assert!(!state.agents[0].alive);
        assert_eq!(state.agents[0].death_step, Some(1));
        let death = events.iter().find(|e| e.kind == EventKind::Death).unwrap();
        assert_eq!(death.targets, vec!["agent_0".to_string()]);
        assert_eq!(death.param_str("cause"), Some("starvation"));
    }

    #[test]
    fn old_age_kills_regardless_of_hp() {
        let config = baseline();
        let mut state = initialize_world(&config);
        state.agents[3].age = config.max_age;
        state.agents[3].hp = 40;
        state.step = 1;
        let events = environment_update(&mut state, &config);
        assert!(!state.agents[3].alive);
        let death = events
            .iter()
            .find(|e| e.kind == EventKind::Death && e.targets[0] == "agent_3")
            .unwrap();
        assert_eq!(death.param_str("cause"), Some("old_age"));
        assert_eq!(death.hp_deltas["agent_3"], -39);
        // an agent at max_age before the step survives one more step only if
        // younger; everyone else aged to 11 and lives
        assert!(state.agents[0].alive);
        assert_eq!(state.agents[0].age, 11);
    }

    #[test]
    fn prey_never_exceed_scaled_max() {
        let mut config = baseline();
        config.prey_params.respawn_rate = 1.0;
        let mut state = initialize_world(&config);
        for step in 1..20 {
            state.step = step;
            environment_update(&mut state, &config);
            assert!(state.prey.len() <= config.max_prey_count() as usize);
        }
        assert_eq!(state.prey.len(), 12);
    }

    #[test]
    fn family_includes_parent_children_and_siblings() {
        let config = baseline();
        let mut state = initialize_world(&config);
        let c1 = state.add_child("agent_0", &config);
        let c2 = state.add_child("agent_0", &config);
        assert_eq!(state.family_of("agent_0"), vec![c1.clone(), c2.clone()]);
        assert_eq!(
            state.family_of(&c1),
            vec!["agent_0".to_string(), c2.clone()]
        );
        assert_eq!(
            state.agent(&c2).unwrap().moral_type,
            state.agents[0].moral_type
        );
        assert_eq!(state.agent(&c2).unwrap().hp, 3);
    }
}
