//! Resolves a handful of actions against a fresh world and prints what each
//! one did. The coin is forced so the output does not depend on luck.
//!
//! cargo run --example resolve_actions

use std::collections::BTreeMap;

use forager::action::{resolve, Action, ActionRequest, ForcedCoin, RoundPhase};
use forager::config::SimulationConfig;
use forager::world::initialize_world;

fn main() {
    let config = SimulationConfig::baseline();
    let mut world = initialize_world(&config);
    let social = RoundPhase::social(1, 0);
    let production = RoundPhase::production(1, config.social_rounds_per_step);
    let prey = world.prey[0].prey_id.clone();
    let plays = [
        (social, "agent_0", Action::Fight { target: "agent_1".into() }, true),
        (social, "agent_2", Action::Rob { target: "agent_3".into(), amount: 5 }, false),
        (
            social,
            "agent_4",
            Action::Allocate {
                allocation_plan: BTreeMap::from([("agent_5".to_string(), 4)]),
            },
            true,
        ),
        (social, "agent_6", Action::Reproduce, true),
        (production, "agent_6", Action::Reproduce, true),
        (production, "agent_7", Action::Collect { target: "plant_0".into(), quantity: 3 }, true),
        (production, "agent_1", Action::Hunt { target: prey }, true),
    ];
    for (phase, actor, action, coin) in plays {
        let out = resolve(&mut world, &config, &phase, &ActionRequest::new(actor, action), &mut ForcedCoin(coin));
        let rec = &out.record;
        match &rec.failure_reason {
            Some(reason) => println!("{actor} {}: nullified ({reason})", rec.kind.as_str()),
            None => println!(
                "{actor} {}: success={} deltas={:?} params={}",
                rec.kind.as_str(),
                rec.success,
                rec.hp_deltas,
                rec.parameters
            ),
        }
    }
}
