//! Prints the fight/rob/hunt success probability against the strength gap,
//! next to the frequency seen in seeded draws.
//!
//! cargo run --example success_curve

use forager::action::{success_probability, Coin, WorldCoin};
use forager::config::SimulationConfig;
use forager::rng::SimRng;

fn main() {
    let config = SimulationConfig::baseline();
    let mut rng = SimRng::seed_from(config.rng_seed);
    let draws = 20_000;
    println!("{:>6} {:>8} {:>8}", "gap", "p", "seen");
    for gap in (-12..=12).step_by(2) {
        let p = success_probability(gap as f64, config.pa_intercept, config.pa_slope).expect("non-zero slope");
        let hits = (0..draws).filter(|_| WorldCoin.flip(&mut rng, p)).count();
        println!("{gap:>6} {p:>8.4} {:>8.4}", hits as f64 / draws as f64);
    }
}
