//! Runs a short persisted simulation, resumes it from an early checkpoint and
//! checks that the event log comes out byte for byte the same.
//!
//! cargo run --example resume_run

use std::fs;

use forager::cognition::ScriptedPolicy;
use forager::config::SimulationConfig;
use forager::engine::run_dir::{checkpoint_steps, EVENTS_FILE};
use forager::engine::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let dir = tmp.path().join("run");
    let mut config = SimulationConfig::baseline();
    config.max_time_steps = 15;

    Simulation::create_in(config.clone(), ScriptedPolicy::new(&config), &dir)?.run()?;
    let original = fs::read(dir.join(EVENTS_FILE))?;
    println!("checkpoints: {:?}", checkpoint_steps(&dir)?);

    let archive = Simulation::resume_in(&dir, ScriptedPolicy::new(&config), Some(6))?.run()?;
    let resumed = fs::read(dir.join(EVENTS_FILE))?;
    println!(
        "resumed from step 6 to step {}: event log {}",
        archive.final_state.step,
        if resumed == original { "identical" } else { "DIFFERENT" }
    );
    Ok(())
}
