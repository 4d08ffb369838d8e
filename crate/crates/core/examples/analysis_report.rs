//! Runs the baseline world, writes the report bundle and prints the headline
//! population numbers.
//!
//! cargo run --example analysis_report -- [out_dir]

use forager::analysis::{compute_population_series, emit_report, final_step, OneHotJudge, ReportOptions};
use forager::cognition::ScriptedPolicy;
use forager::config::SimulationConfig;
use forager::engine::run_simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "report".into());
    let config = SimulationConfig::baseline();
    let archive = run_simulation(config.clone(), ScriptedPolicy::new(&config))?;

    let last = final_step(&archive.events);
    let series = compute_population_series(&archive.events, last)?;
    for step in [0, last / 2, last] {
        if let Some(p) = series.at(step) {
            println!("step {step:>3}: {:>3} living {:?}", p.total, p.counts);
        }
    }

    // The one-hot judge stands in for a chat model and yields a perfect matrix.
    let bundle = emit_report(&archive, &out, &ReportOptions::default(), Some(&mut OneHotJudge))?;
    println!(
        "wrote {} with {} agent profiles and {} metric files",
        bundle.main_report.display(),
        bundle.agent_profiles.len(),
        bundle.metric_files.len()
    );
    Ok(())
}
