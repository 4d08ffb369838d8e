//! Final (action-handler) validation and the HP dynamics of every action.
//!
//! Each resolver either nullifies the request, leaving the world untouched,
//! or applies the action and reports the exact HP changes it caused. Fight,
//! rob and hunt deduct their initiation cost before any Bernoulli draw; an
//! actor killed by that cost consumes no draw.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::{success_probability, Action, ActionKind, ActionRequest, RoundPhase};
use crate::config::SimulationConfig;
use crate::rng::SimRng;
use crate::world::{Draw, EventRecord, WorldState};

/// HP paid up front by fight, rob and hunt.
pub const INIT_COST: i64 = 1;

/// Source of Bernoulli outcomes for probabilistic actions.
pub trait Coin {
    fn flip(&mut self, rng: &mut SimRng, p: f64) -> bool;
}

/// Draws from the world generator.
#[derive(Debug, Clone, Copy, Default)]
pub struct WorldCoin;

impl Coin for WorldCoin {
    fn flip(&mut self, rng: &mut SimRng, p: f64) -> bool {
        rng.bernoulli(p)
    }
}

/// Always returns the given outcome without touching the generator.
#[derive(Debug, Clone, Copy)]
pub struct ForcedCoin(pub bool);

impl Coin for ForcedCoin {
    fn flip(&mut self, _rng: &mut SimRng, _p: f64) -> bool {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionOutcome {
    pub record: EventRecord,
    pub actor_died: bool,
    pub target_died: bool,
    pub prey_killed: bool,
    pub reward_granted: bool,
    /// Recipients a message was delivered to.
    pub deliveries: Vec<String>,
    pub newborn: Option<String>,
    /// Agents that died while resolving this action, in order.
    pub deaths: Vec<String>,
}

impl ActionOutcome {
    fn new(record: EventRecord) -> Self {
        Self {
            record,
            actor_died: false,
            target_died: false,
            prey_killed: false,
            reward_granted: false,
            deliveries: Vec::new(),
            newborn: None,
            deaths: Vec::new(),
        }
    }

    pub fn is_nullified(&self) -> bool {
        self.record.is_nullified()
    }

    pub fn failure_reason(&self) -> Option<&str> {
        self.record.failure_reason.as_deref()
    }
}

fn record(
    phase: &RoundPhase,
    actor: &str,
    kind: ActionKind,
    targets: Vec<String>,
    parameters: Value,
) -> EventRecord {
    let mut rec = EventRecord::new(phase.step, phase.kind.phase(), kind.into());
    rec.round_index = Some(phase.round_index);
    rec.actor_id = Some(actor.to_string());
    rec.targets = targets;
    rec.parameters = parameters;
    rec
}

fn nullified(mut rec: EventRecord, reason: impl Into<String>) -> ActionOutcome {
    rec.success = false;
    rec.failure_reason = Some(reason.into());
    ActionOutcome::new(rec)
}

/// Captures HP before a mutation and writes the signed differences afterwards.
struct HpWatch(Vec<(String, i64)>);

impl HpWatch {
    fn new(state: &WorldState, ids: &[&str]) -> Self {
        Self(
            ids.iter()
                .map(|id| (id.to_string(), state.entity_hp(id)))
                .collect(),
        )
    }

    fn add(&mut self, id: &str, before: i64) {
        self.0.push((id.to_string(), before));
    }

    fn finish(self, state: &WorldState, rec: &mut EventRecord) {
        let mut deltas = BTreeMap::new();
        for (id, before) in self.0 {
            let diff = state.entity_hp(&id) - before;
            if diff != 0 {
                deltas.insert(id, diff);
            }
        }
        rec.hp_deltas = deltas;
    }
}

fn actor_guard(state: &WorldState, actor: &str) -> Result<(), String> {
    match state.agent(actor) {
        Some(a) if a.alive => Ok(()),
        Some(_) => Err(format!("actor {actor} is not alive")),
        None => Err(format!("actor {actor} does not exist")),
    }
}

fn living_target(state: &WorldState, actor: &str, target: &str) -> Result<(), String> {
    if target == actor {
        return Err("cannot target yourself".to_string());
    }
    match state.agent(target) {
        Some(a) if a.alive => Ok(()),
        Some(_) => Err(format!("target {target} is not alive")),
        None => Err(format!("target {target} does not exist")),
    }
}

fn clamp_hp(hp: i64, max: i64) -> i64 {
    hp.clamp(0, max)
}

/// Pays the initiation cost; returns false (and records the death) if the
/// actor dies from it.
fn pay_init_cost(state: &mut WorldState, actor: &str, out: &mut ActionOutcome) -> bool {
    let a = state.agent_mut(actor).expect("actor checked");
    a.hp = (a.hp - INIT_COST).max(0);
    if a.hp == 0 {
        state.kill_agent(actor);
        out.actor_died = true;
        out.deaths.push(actor.to_string());
        false
    } else {
        true
    }
}

fn contest(
    state: &mut WorldState,
    config: &SimulationConfig,
    delta_pa: f64,
    coin: &mut dyn Coin,
    out: &mut ActionOutcome,
) -> bool {
    let p = success_probability(delta_pa, config.pa_intercept, config.pa_slope)
        .expect("config validation guarantees a non-zero slope");
    let success = coin.flip(&mut state.rng, p);
    out.record.draws.push(Draw {
        probability: p,
        success,
    });
    success
}

/// Validates round legality and the actor, then dispatches to the resolver.
pub fn resolve(
    state: &mut WorldState,
    config: &SimulationConfig,
    phase: &RoundPhase,
    request: &ActionRequest,
    coin: &mut dyn Coin,
) -> ActionOutcome {
    let actor = request.actor_id.as_str();
    let kind = request.action.kind();
    if !phase.kind.allows(kind) {
        let rec = record(phase, actor, kind, request.action.targets(), Value::Null);
        let round = match phase.kind {
            super::RoundKind::Social => "social",
            super::RoundKind::Production => "production",
        };
        return nullified(rec, format!("{kind} is not allowed in a {round} round"));
    }
    match &request.action {
        Action::Collect { target, quantity } => {
            resolve_collect(state, config, phase, actor, target, *quantity)
        }
        Action::Hunt { target } => resolve_hunt(state, config, phase, actor, target, coin),
        Action::Reproduce => resolve_reproduce(state, config, phase, actor),
        Action::Allocate { allocation_plan } => {
            resolve_allocate(state, phase, actor, allocation_plan)
        }
        Action::Communicate {
            recipients,
            message,
            intent,
        } => {
            let mut out = resolve_communicate(state, config, phase, actor, recipients, message);
            if let Some(intent) = intent {
                if !out.is_nullified() {
                    out.record.parameters = json!({ "intent": intent });
                }
            }
            out
        }
        Action::Fight { target } => resolve_fight(state, config, phase, actor, target, coin),
        Action::Rob { target, amount } => {
            resolve_rob(state, config, phase, actor, target, *amount, coin)
        }
        Action::DoNothing => resolve_do_nothing(state, phase, actor),
    }
}

pub fn resolve_collect(
    state: &mut WorldState,
    config: &SimulationConfig,
    phase: &RoundPhase,
    actor: &str,
    plant_id: &str,
    q_req: u32,
) -> ActionOutcome {
    let mut rec = record(
        phase,
        actor,
        ActionKind::Collect,
        vec![plant_id.to_string()],
        json!({ "requested": q_req }),
    );
    if let Err(reason) = actor_guard(state, actor) {
        return nullified(rec, reason);
    }
    let Some(plant) = state.plant(plant_id) else {
        return nullified(rec, format!("{plant_id} is not a plant"));
    };
    if q_req == 0 {
        return nullified(rec, "requested quantity must be positive");
    }
    if plant.quantity < q_req {
        return nullified(
            rec,
            format!(
                "{plant_id} has {} units, fewer than the {q_req} requested",
                plant.quantity
            ),
        );
    }
    let collected = q_req.min(plant.quantity).min(config.collect_cap);
    if collected == 0 {
        return nullified(rec, format!("nothing collectible from {plant_id}"));
    }
    let nutrition = plant.nutrition_per_unit as i64;
    let watch = HpWatch::new(state, &[actor]);
    {
        let plant = state.plant_mut(plant_id).expect("checked");
        plant.quantity -= collected;
        if plant.quantity == 0 {
            plant.steps_until_respawn = plant.respawn_delay;
        }
    }
    let a = state.agent_mut(actor).expect("checked");
    a.hp = clamp_hp(a.hp + collected as i64 * nutrition, a.max_hp);
    rec.parameters = json!({ "requested": q_req, "collected": collected, "nutrition": nutrition });
    watch.finish(state, &mut rec);
    ActionOutcome::new(rec)
}

pub fn resolve_allocate(
    state: &mut WorldState,
    phase: &RoundPhase,
    actor: &str,
    plan: &BTreeMap<String, u32>,
) -> ActionOutcome {
    let total: i64 = plan.values().map(|v| *v as i64).sum();
    let mut rec = record(
        phase,
        actor,
        ActionKind::Allocate,
        plan.keys().cloned().collect(),
        json!({ "allocation_plan": plan, "total": total }),
    );
    if let Err(reason) = actor_guard(state, actor) {
        return nullified(rec, reason);
    }
    if plan.is_empty() {
        return nullified(rec, "allocation plan is empty");
    }
    for (target, amount) in plan {
        if let Err(reason) = living_target(state, actor, target) {
            return nullified(rec, reason);
        }
        if *amount == 0 {
            return nullified(rec, format!("allocation to {target} must be positive"));
        }
    }
    let hp = state.agent(actor).expect("checked").hp;
    if hp <= total {
        return nullified(
            rec,
            format!("insufficient HP: have {hp}, must exceed the {total} allocated"),
        );
    }
    let ids: Vec<&str> = std::iter::once(actor)
        .chain(plan.keys().map(String::as_str))
        .collect();
    let watch = HpWatch::new(state, &ids);
    for (target, amount) in plan {
        let t = state.agent_mut(target).expect("checked");
        t.hp = clamp_hp(t.hp + *amount as i64, t.max_hp);
    }
    let a = state.agent_mut(actor).expect("checked");
    a.hp = clamp_hp(a.hp - total, a.max_hp);
    watch.finish(state, &mut rec);
    ActionOutcome::new(rec)
}

pub fn resolve_fight(
    state: &mut WorldState,
    config: &SimulationConfig,
    phase: &RoundPhase,
    actor: &str,
    target: &str,
    coin: &mut dyn Coin,
) -> ActionOutcome {
    let rec = record(
        phase,
        actor,
        ActionKind::Fight,
        vec![target.to_string()],
        Value::Null,
    );
    if let Err(reason) = actor_guard(state, actor).and_then(|_| living_target(state, actor, target))
    {
        return nullified(rec, reason);
    }
    let watch = HpWatch::new(state, &[actor, target]);
    let mut out = ActionOutcome::new(rec);
    if !pay_init_cost(state, actor, &mut out) {
        out.record.success = false;
        watch.finish(state, &mut out.record);
        return out;
    }
    let (attacker, defender) = (
        state.agent(actor).expect("checked"),
        state.agent(target).expect("checked"),
    );
    let damage = attacker.damage();
    let delta = attacker.physical_ability - defender.physical_ability;
    let success = contest(state, config, delta, coin, &mut out);
    out.record.success = success;
    out.record.parameters = json!({ "damage": if success { damage } else { 0 } });
    if success {
        let t = state.agent_mut(target).expect("checked");
        t.hp = clamp_hp(t.hp - damage, t.max_hp);
        if t.hp == 0 {
            state.kill_agent(target);
            out.target_died = true;
            out.deaths.push(target.to_string());
        }
    }
    watch.finish(state, &mut out.record);
    out
}

#[allow(clippy::too_many_arguments)]
pub fn resolve_rob(
    state: &mut WorldState,
    config: &SimulationConfig,
    phase: &RoundPhase,
    actor: &str,
    target: &str,
    amount: u32,
    coin: &mut dyn Coin,
) -> ActionOutcome {
    let rec = record(
        phase,
        actor,
        ActionKind::Rob,
        vec![target.to_string()],
        json!({ "requested": amount }),
    );
    if let Err(reason) = actor_guard(state, actor).and_then(|_| living_target(state, actor, target))
    {
        return nullified(rec, reason);
    }
    if amount == 0 {
        return nullified(rec, "rob amount must be positive");
    }
    let target_hp = state.agent(target).expect("checked").hp;
    if target_hp < amount as i64 {
        return nullified(
            rec,
            format!("target {target} has {target_hp} HP, less than the {amount} requested"),
        );
    }
    let watch = HpWatch::new(state, &[actor, target]);
    let mut out = ActionOutcome::new(rec);
    if !pay_init_cost(state, actor, &mut out) {
        out.record.success = false;
        watch.finish(state, &mut out.record);
        return out;
    }
    let delta = state.agent(actor).expect("checked").physical_ability
        - state.agent(target).expect("checked").physical_ability;
    let success = contest(state, config, delta, coin, &mut out);
    out.record.success = success;
    if success {
        let t = state.agent_mut(target).expect("checked");
        t.hp = clamp_hp(t.hp - amount as i64, t.max_hp);
        let target_dead = t.hp == 0;
        let a = state.agent_mut(actor).expect("checked");
        a.hp = clamp_hp(a.hp + amount as i64, a.max_hp);
        if target_dead {
            state.kill_agent(target);
            out.target_died = true;
            out.deaths.push(target.to_string());
        }
    }
    watch.finish(state, &mut out.record);
    out
}

pub fn resolve_hunt(
    state: &mut WorldState,
    config: &SimulationConfig,
    phase: &RoundPhase,
    actor: &str,
    prey_id: &str,
    coin: &mut dyn Coin,
) -> ActionOutcome {
    let rec = record(
        phase,
        actor,
        ActionKind::Hunt,
        vec![prey_id.to_string()],
        Value::Null,
    );
    if let Err(reason) = actor_guard(state, actor) {
        return nullified(rec, reason);
    }
    let Some(prey) = state.prey(prey_id).filter(|p| p.hp > 0) else {
        return nullified(rec, format!("prey {prey_id} does not exist"));
    };
    let (prey_pa, prey_max, counter) = (prey.physical_ability, prey.max_hp, prey.counter_damage);
    let watch = HpWatch::new(state, &[actor, prey_id]);
    let mut out = ActionOutcome::new(rec);
    if !pay_init_cost(state, actor, &mut out) {
        out.record.success = false;
        out.record.parameters = json!({ "damage": 0, "killed": false, "prey_max_hp": prey_max });
        watch.finish(state, &mut out.record);
        return out;
    }
    let hunter = state.agent(actor).expect("checked");
    let damage = hunter.damage();
    let delta = hunter.physical_ability - prey_pa;
    let success = contest(state, config, delta, coin, &mut out);
    out.record.success = success;
    let mut killed = false;
    if success {
        let p = state.prey_mut(prey_id).expect("checked");
        p.hp = (p.hp - damage).max(0);
        if p.hp == 0 {
            killed = true;
            state.prey.retain(|p| p.prey_id != prey_id);
            let a = state.agent_mut(actor).expect("checked");
            a.hp = clamp_hp(a.hp + prey_max, a.max_hp);
            out.prey_killed = true;
            out.reward_granted = true;
        }
    } else {
        let a = state.agent_mut(actor).expect("checked");
        a.hp = clamp_hp(a.hp - counter, a.max_hp);
        if a.hp == 0 {
            state.kill_agent(actor);
            out.actor_died = true;
            out.deaths.push(actor.to_string());
        }
    }
    out.record.parameters = json!({
        "damage": if success { damage } else { 0 },
        "killed": killed,
        "prey_max_hp": prey_max,
        "counter_damage": if success { 0 } else { counter },
    });
    watch.finish(state, &mut out.record);
    out
}

pub fn resolve_reproduce(
    state: &mut WorldState,
    config: &SimulationConfig,
    phase: &RoundPhase,
    actor: &str,
) -> ActionOutcome {
    let mut rec = record(phase, actor, ActionKind::Reproduce, Vec::new(), Value::Null);
    if let Err(reason) = actor_guard(state, actor) {
        return nullified(rec, reason);
    }
    let parent = state.agent(actor).expect("checked");
    if parent.age < config.min_age_repro {
        return nullified(
            rec,
            format!(
                "minimum age {} not met (age {})",
                config.min_age_repro, parent.age
            ),
        );
    }
    if parent.hp < config.min_hp_repro as i64 {
        return nullified(
            rec,
            format!(
                "minimum HP {} not met (HP {})",
                config.min_hp_repro, parent.hp
            ),
        );
    }
    let mut watch = HpWatch::new(state, &[actor]);
    let child = state.add_child(actor, config);
    watch.add(&child, 0);
    let moral_type = state.agent(&child).expect("just created").moral_type;
    let child_pa = state.agent(&child).expect("just created").physical_ability;
    let a = state.agent_mut(actor).expect("checked");
    a.hp = clamp_hp(a.hp - config.hp_cost_repro as i64, a.max_hp);
    let mut out_deaths = Vec::new();
    if a.hp == 0 {
        state.kill_agent(actor);
        out_deaths.push(actor.to_string());
    }
    rec.parameters = json!({
        "child_id": child,
        "moral_type": moral_type,
        "child_hp": config.offspring_hp,
        "child_physical_ability": child_pa,
        "cost": config.hp_cost_repro,
    });
    watch.finish(state, &mut rec);
    let mut out = ActionOutcome::new(rec);
    out.actor_died = !out_deaths.is_empty();
    out.deaths = out_deaths;
    out.newborn = Some(child);
    out
}

pub fn resolve_communicate(
    state: &mut WorldState,
    config: &SimulationConfig,
    phase: &RoundPhase,
    actor: &str,
    recipients: &[String],
    message: &str,
) -> ActionOutcome {
    let mut rec = record(
        phase,
        actor,
        ActionKind::Communicate,
        recipients.to_vec(),
        Value::Null,
    );
    rec.message = Some(message.to_string());
    if let Err(reason) = actor_guard(state, actor) {
        return nullified(rec, reason);
    }
    if recipients.is_empty() {
        return nullified(rec, "no recipients");
    }
    for r in recipients {
        match state.agent(r) {
            Some(a) if a.alive => {}
            Some(_) => return nullified(rec, format!("recipient {r} is not alive")),
            None => return nullified(rec, format!("recipient {r} does not exist")),
        }
    }
    let len = message.chars().count();
    if len > config.message_max_length as usize {
        return nullified(
            rec,
            format!(
                "message has {len} characters, limit is {}",
                config.message_max_length
            ),
        );
    }
    let mut out = ActionOutcome::new(rec);
    out.deliveries = recipients.to_vec();
    out
}

pub fn resolve_do_nothing(state: &WorldState, phase: &RoundPhase, actor: &str) -> ActionOutcome {
    let rec = record(phase, actor, ActionKind::DoNothing, Vec::new(), Value::Null);
    if let Err(reason) = actor_guard(state, actor) {
        return nullified(rec, reason);
    }
    ActionOutcome::new(rec)
}
