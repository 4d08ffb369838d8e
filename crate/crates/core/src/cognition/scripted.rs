//! Deterministic rule-based policies, one archetype per moral type.
//!
//! The rules are fixed and documented in `docs/scripted_policy.md`. They
//! draw no randomness, so a run driven by them is reproducible from the
//! world seed alone.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::memory::{MemoryDocument, ShortTermPlan};
use super::observation::{ObservationBundle, OtherAgentView, ScenarioBrief};
use super::policy::{DecisionFailure, PolicyBackend, PolicyResponse};
use crate::action::{Action, ActionKind, Intent, RoundKind};
use crate::config::SimulationConfig;
use crate::moral::MoralType;
use crate::world::EventKind;

/// Largest single gift.
pub const MAX_GIFT: i64 = 5;
/// HP at or below which an agent counts as starving.
pub const STARVING_HP: i64 = 8;
/// Extra HP above the reproduction minimum before reproducing.
pub const SELFISH_REPRO_BUFFER: i64 = 2;
pub const DEFAULT_REPRO_BUFFER: i64 = 6;
/// Margin above prey counter-damage before hunting.
pub const HUNT_MARGIN: i64 = 3;

const LEDGER_MARKER: &str = "ledger_last_seq";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    /// HP above which an agent has something to give.
    pub surplus_line: i64,
    /// Family members at or below this HP are in danger.
    pub danger_hp: i64,
    pub min_hp_repro: i64,
    pub collect_cap: u32,
}

impl Thresholds {
    pub fn from_config(config: &SimulationConfig) -> Self {
        Self {
            surplus_line: config.min_hp_repro as i64 + 5,
            danger_hp: 2 * config.offspring_hp as i64,
            min_hp_repro: config.min_hp_repro as i64,
            collect_cap: config.collect_cap,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScriptedPolicy {
    thresholds: Thresholds,
    forced: Option<MoralType>,
}

impl ScriptedPolicy {
    /// Each agent follows the rules of its own moral type.
    pub fn new(config: &SimulationConfig) -> Self {
        Self {
            thresholds: Thresholds::from_config(config),
            forced: None,
        }
    }

    /// Every agent follows the rules of `moral_type`.
    pub fn for_type(config: &SimulationConfig, moral_type: MoralType) -> Self {
        Self {
            thresholds: Thresholds::from_config(config),
            forced: Some(moral_type),
        }
    }

    fn decide_inner(&self, bundle: &ObservationBundle) -> PolicyResponse {
        let moral = self.forced.unwrap_or(bundle.self_status.moral_type);
        let mut memory = bundle.long_term_memory.clone();
        let ledger = if moral == MoralType::Reciprocal {
            update_ledger(&mut memory, bundle)
        } else {
            BTreeMap::new()
        };
        let ctx = Ctx {
            b: bundle,
            t: &self.thresholds,
            moral,
            ledger: &ledger,
        };
        let (action, why) = match &bundle.scenario {
            Some(s) => ctx.scenario(s),
            None => match bundle.round_kind {
                RoundKind::Production => ctx.production(),
                RoundKind::Social => ctx.social(),
            },
        };
        let action = if bundle.legal_actions.contains(&action.kind()) {
            action
        } else {
            Action::DoNothing
        };
        PolicyResponse {
            agent_id: bundle.agent_id().to_string(),
            thinking: format!("{moral} rule: {why}"),
            long_term_memory: memory,
            short_term_plan: ShortTermPlan {
                reasoning_for_prioritizing_plans_and_goals: why.to_string(),
                next_steps_plan: json!(action.kind().as_str()),
            },
            action,
        }
    }
}

impl PolicyBackend for ScriptedPolicy {
    fn decide(&mut self, bundle: &ObservationBundle) -> Result<PolicyResponse, DecisionFailure> {
        Ok(self.decide_inner(bundle))
    }

    fn name(&self) -> String {
        match self.forced {
            Some(t) => format!("scripted:{t}"),
            None => "scripted".to_string(),
        }
    }
}

struct Ctx<'a> {
    b: &'a ObservationBundle,
    t: &'a Thresholds,
    moral: MoralType,
    ledger: &'a BTreeMap<String, i64>,
}

impl Ctx<'_> {
    fn hp(&self) -> i64 {
        self.b.self_status.hp
    }

    fn gift(&self) -> i64 {
        (self.hp() - self.t.surplus_line).min(MAX_GIFT)
    }

    fn allocate(target: &str, amount: i64) -> Action {
        Action::Allocate {
            allocation_plan: [(target.to_string(), amount as u32)].into_iter().collect(),
        }
    }

    fn production(&self) -> (Action, &'static str) {
        let me = &self.b.self_status;
        let buffer = if self.moral == MoralType::Selfish {
            SELFISH_REPRO_BUFFER
        } else {
            DEFAULT_REPRO_BUFFER
        };
        if me.can_reproduce && me.hp >= self.t.min_hp_repro + buffer {
            return (Action::Reproduce, "enough HP to reproduce");
        }
        if me.hp < me.max_hp {
            let best = self
                .b
                .environment
                .plants
                .iter()
                .filter(|p| p.quantity > 0)
                .max_by(|a, b| {
                    a.quantity
                        .cmp(&b.quantity)
                        .then(b.plant_id.cmp(&a.plant_id))
                });
            if let Some(p) = best {
                // Leave one unit behind so the plant keeps regrowing, unless starving.
                let take = if p.quantity >= 2 {
                    p.quantity - 1
                } else if me.hp <= STARVING_HP {
                    1
                } else {
                    0
                };
                if take > 0 {
                    return (
                        Action::Collect {
                            target: p.plant_id.clone(),
                            quantity: take.min(self.t.collect_cap),
                        },
                        "collect from the richest plant",
                    );
                }
            }
        }
        let prey = self
            .b
            .environment
            .prey
            .iter()
            .min_by(|a, b| a.hp.cmp(&b.hp).then(a.prey_id.cmp(&b.prey_id)));
        if let Some(p) = prey {
            if me.hp > p.counter_damage + HUNT_MARGIN {
                return (
                    Action::Hunt {
                        target: p.prey_id.clone(),
                    },
                    "hunt the weakest prey",
                );
            }
        }
        (Action::DoNothing, "nothing safe to do")
    }

    fn family_in_danger(&self) -> Option<&str> {
        self.b
            .self_status
            .family
            .iter()
            .filter(|f| f.alive && f.hp <= self.t.danger_hp && self.b.other(&f.agent_id).is_some())
            .min_by(|a, b| a.hp.cmp(&b.hp).then(a.agent_id.cmp(&b.agent_id)))
            .map(|f| f.agent_id.as_str())
    }

    fn weakest<'b>(
        &self,
        candidates: impl Iterator<Item = &'b OtherAgentView>,
    ) -> Option<&'b OtherAgentView> {
        candidates.min_by(|a, b| a.hp.cmp(&b.hp).then(a.agent_id.cmp(&b.agent_id)))
    }

    fn social(&self) -> (Action, &'static str) {
        let surplus = self.gift() > 0;
        if self.moral != MoralType::Selfish && surplus {
            if let Some(f) = self.family_in_danger() {
                return (Self::allocate(f, self.gift()), "family member in danger");
            }
        }
        match self.moral {
            MoralType::Universal => {
                if surplus {
                    if let Some(w) = self.weakest(self.b.other_agents.iter()) {
                        return (
                            Self::allocate(&w.agent_id, self.gift()),
                            "share surplus with the weakest",
                        );
                    }
                }
                if self.b.round_index == 0 && !self.b.other_agents.is_empty() {
                    let recipients = self
                        .b
                        .other_agents
                        .iter()
                        .map(|o| o.agent_id.clone())
                        .collect();
                    return (
                        Action::Communicate {
                            recipients,
                            message: "Join me to hunt together and we share the prey fairly".into(),
                            intent: Some(Intent::Invite),
                        },
                        "invite everyone to cooperate",
                    );
                }
                (Action::DoNothing, "no one to help")
            }
            MoralType::Kin => (Action::DoNothing, "family is safe"),
            MoralType::Reciprocal => {
                if surplus {
                    let owed = self.weakest(
                        self.b
                            .other_agents
                            .iter()
                            .filter(|o| self.balance(&o.agent_id) > 0),
                    );
                    if let Some(o) = owed {
                        return (Self::allocate(&o.agent_id, self.gift()), "repay a helper");
                    }
                }
                if self.hp() <= STARVING_HP {
                    let worst = self
                        .b
                        .other_agents
                        .iter()
                        .filter(|o| self.balance(&o.agent_id) < 0 && o.hp > 0)
                        .min_by(|a, b| {
                            self.balance(&a.agent_id)
                                .cmp(&self.balance(&b.agent_id))
                                .then(a.agent_id.cmp(&b.agent_id))
                        });
                    if let Some(o) = worst {
                        return (self.rob(o), "take back from someone who harmed me");
                    }
                }
                (Action::DoNothing, "no debts to settle")
            }
            MoralType::Selfish => {
                if self.hp() <= STARVING_HP {
                    if let Some(w) = self.weakest(self.b.other_agents.iter().filter(|o| o.hp > 0)) {
                        return (self.rob(w), "starving, rob the weakest");
                    }
                }
                (Action::DoNothing, "keep my HP")
            }
        }
    }

    fn rob(&self, target: &OtherAgentView) -> Action {
        let damage = (self.b.self_status.physical_ability.floor() as i64).max(1);
        Action::Rob {
            target: target.agent_id.clone(),
            amount: target.hp.min(damage) as u32,
        }
    }

    fn balance(&self, id: &str) -> i64 {
        self.ledger.get(id).copied().unwrap_or(0)
    }

    fn scenario(&self, s: &ScenarioBrief) -> (Action, &'static str) {
        match s {
            ScenarioBrief::Invitation { receiver } => {
                let invite = match self.b.other(receiver) {
                    None => false,
                    Some(r) => match self.moral {
                        MoralType::Universal => true,
                        MoralType::Reciprocal => match r.moral_type {
                            None => true,
                            Some(t) => matches!(t, MoralType::Reciprocal | MoralType::Universal),
                        },
                        MoralType::Kin | MoralType::Selfish => {
                            r.physical_ability > self.b.self_status.physical_ability
                        }
                    },
                };
                let (intent, message, why) = if invite {
                    (Intent::Invite, "Let us hunt together", "invite")
                } else {
                    (Intent::Decline, "I will hunt alone this time", "decline")
                };
                (
                    Action::Communicate {
                        recipients: vec![receiver.clone()],
                        message: message.into(),
                        intent: Some(intent),
                    },
                    why,
                )
            }
            ScenarioBrief::HpSharing { child } => {
                if self.moral == MoralType::Selfish {
                    return (Action::DoNothing, "keep HP for myself");
                }
                let reserve = if self.moral == MoralType::Kin {
                    self.t.min_hp_repro
                } else {
                    self.t.surplus_line
                };
                let share = (self.hp() - reserve).min(MAX_GIFT);
                if share > 0 && self.b.other(child).is_some() {
                    (Self::allocate(child, share), "share with my child")
                } else {
                    (Action::DoNothing, "not enough HP to share")
                }
            }
            ScenarioBrief::AllocationTarget { target } => {
                let willing = match self.moral {
                    MoralType::Universal => true,
                    MoralType::Kin => self.b.is_family(target),
                    MoralType::Reciprocal => self.b.is_family(target) || self.balance(target) > 0,
                    MoralType::Selfish => false,
                };
                let share = self.gift();
                if willing && share > 0 && self.b.other(target).is_some() {
                    (Self::allocate(target, share), "help the target")
                } else {
                    (Action::DoNothing, "decline to help")
                }
            }
        }
    }
}

/// Folds new interactions into the per-agent balance kept in memory and
/// returns the updated balances.
fn update_ledger(memory: &mut MemoryDocument, bundle: &ObservationBundle) -> BTreeMap<String, i64> {
    let me = bundle.agent_id();
    let mut balances: BTreeMap<String, i64> = BTreeMap::new();
    if let Value::Object(map) = &memory.agent_specific {
        for (id, entry) in map {
            if let Some(b) = entry.get("balance").and_then(Value::as_i64) {
                balances.insert(id.clone(), b);
            }
        }
    }
    let last_seen = memory.strategies.get(LEDGER_MARKER).and_then(Value::as_u64);
    let mut newest = last_seen;
    for e in &bundle.history.interactions {
        if last_seen.is_some_and(|s| e.seq <= s) {
            continue;
        }
        newest = Some(newest.map_or(e.seq, |n| n.max(e.seq)));
        let Some(actor) = e.actor_id.as_deref() else {
            continue;
        };
        let received = e.hp_deltas.get(me).copied().unwrap_or(0);
        match e.kind {
            EventKind::Allocate if actor != me && e.success => {
                *balances.entry(actor.to_string()).or_default() += received.max(0);
            }
            EventKind::Allocate if actor == me && e.success => {
                for (t, d) in &e.hp_deltas {
                    if t != me {
                        *balances.entry(t.clone()).or_default() -= d.max(&0);
                    }
                }
            }
            EventKind::Fight | EventKind::Rob if actor != me && e.failure_reason.is_none() => {
                *balances.entry(actor.to_string()).or_default() -= received.abs().max(1);
            }
            _ => {}
        }
    }
    if balances.is_empty() && newest == last_seen {
        return balances;
    }
    let mut section = match &memory.agent_specific {
        Value::Object(m) => m.clone(),
        _ => Map::new(),
    };
    for (id, b) in &balances {
        let entry = section.entry(id.clone()).or_insert_with(|| json!({}));
        if !entry.is_object() {
            *entry = json!({});
        }
        entry["balance"] = json!(b);
    }
    memory.agent_specific = Value::Object(section);
    if let Some(n) = newest {
        let mut strategies = match &memory.strategies {
            Value::Object(m) => m.clone(),
            _ => Map::new(),
        };
        strategies.insert(LEDGER_MARKER.into(), json!(n));
        memory.strategies = Value::Object(strategies);
    }
    balances
}

/// Legal action kinds for a scripted decision, for documentation and tests.
pub fn scripted_kinds(moral: MoralType, round: RoundKind) -> Vec<ActionKind> {
    let social: &[ActionKind] = match moral {
        MoralType::Universal => &[
            ActionKind::Allocate,
            ActionKind::Communicate,
            ActionKind::DoNothing,
        ],
        MoralType::Kin => &[ActionKind::Allocate, ActionKind::DoNothing],
        MoralType::Reciprocal => &[ActionKind::Allocate, ActionKind::Rob, ActionKind::DoNothing],
        MoralType::Selfish => &[ActionKind::Rob, ActionKind::DoNothing],
    };
    match round {
        RoundKind::Social => social.to_vec(),
        RoundKind::Production => vec![
            ActionKind::Reproduce,
            ActionKind::Collect,
            ActionKind::Hunt,
            ActionKind::DoNothing,
        ],
    }
}
