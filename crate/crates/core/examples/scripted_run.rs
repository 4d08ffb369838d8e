//! Runs the baseline world with rule-based agents and prints the progress log.
//!
//! cargo run --example scripted_run -- [seed] [run_dir]

use forager::cognition::ScriptedPolicy;
use forager::config::SimulationConfig;
use forager::engine::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut config = SimulationConfig::baseline();
    if let Some(seed) = args.next() {
        config.rng_seed = seed.parse()?;
    }
    let policy = ScriptedPolicy::new(&config);
    let sim = match args.next() {
        Some(dir) => Simulation::create_in(config, policy, dir)?,
        None => Simulation::new(config, policy)?,
    };
    let archive = sim.echo_progress(true).run()?;
    println!(
        "{} events, {} agents ever lived, stopped: {}",
        archive.events.len(),
        archive.final_state.agents.len(),
        archive.termination.as_str()
    );
    Ok(())
}
