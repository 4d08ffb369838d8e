//! Runs the invitation and HP-sharing games with rule-based agents and prints
//! the mean outcome per table.
//!
//! cargo run --example minigames

use forager::cognition::ScriptedPolicy;
use forager::config::SimulationConfig;
use forager::minigames::{default_hp_grid, run_hp_sharing_game, run_invitation_game, LifeStage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimulationConfig::baseline();
    let mut policy = ScriptedPolicy::new(&config);

    let invitation = run_invitation_game(&mut policy, &config, 2, 1)?;
    println!("invitation rate by sender:");
    for (row, label) in invitation.row_labels.iter().enumerate() {
        let cells = &invitation.cells[row];
        let rate: f64 = cells.iter().filter_map(|c| c.mean).sum::<f64>() / cells.len() as f64;
        println!("  {label:<18} {rate:.2}");
    }

    let tables = run_hp_sharing_game(&mut policy, &config, &default_hp_grid(&config), &LifeStage::ALL, 1, 1)?;
    println!("mean HP shared with a child:");
    for t in &tables {
        let values: Vec<f64> = t.records.iter().filter_map(|r| r.value).collect();
        println!("  {:<32} {:.2}", t.name, values.iter().sum::<f64>() / values.len() as f64);
    }
    Ok(())
}
