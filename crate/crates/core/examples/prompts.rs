//! Prints the rendered system prompt for one moral type.
//!
//! cargo run --example prompts -- [universal|reciprocal|kin|selfish]

use forager::config::SimulationConfig;
use forager::llm::PromptAssets;
use forager::moral::MoralType;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let moral: MoralType = std::env::args().nth(1).unwrap_or_else(|| "kin".into()).parse()?;
    let config = SimulationConfig::baseline();
    let assets = PromptAssets::builtin();
    println!("{}", assets.system_message(&config, moral)?);
    println!("---\n{}", assets.reflection_message(&config)?);
    Ok(())
}
