//! The single seeded generator that drives every stochastic draw in a run.
//!
//! Draw order is part of the determinism contract:
//!
//! 1. initialization: founder queue shuffle, then founder physical ability
//!    (in id order), then prey HP (in id order);
//! 2. each step: prey spawn trials and their HP draws, then the queue
//!    reshuffle;
//! 3. each round: Bernoulli draws for fight/rob/hunt and physical-ability
//!    draws for newborns, in execution order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn seed_from(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform sample in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Bernoulli trial with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Gaussian sample. A zero standard deviation still consumes one draw so
    /// that draw order does not depend on configuration values.
    pub fn gaussian(&mut self, mean: f64, std: f64) -> f64 {
        let std = std.abs();
        match Normal::new(mean, std) {
            Ok(normal) => {
                let sample = normal.sample(&mut self.inner);
                if std == 0.0 {
                    mean
                } else {
                    sample
                }
            }
            Err(_) => mean,
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// Derives an independent seed from a base seed and a list of coordinates
/// (SplitMix64 finalizer applied per coordinate).
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    let mut z = base;
    for c in coords {
        z = splitmix(z ^ splitmix(*c));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_returns_mean_exactly() {
        let mut rng = SimRng::seed_from(7);
        for _ in 0..100 {
            assert_eq!(rng.gaussian(6.0, 0.0), 6.0);
        }
    }

    #[test]
    fn state_round_trips_through_json() {
        let mut rng = SimRng::seed_from(99);
        rng.uniform();
        let text = serde_json::to_string(&rng).unwrap();
        let mut back: SimRng = serde_json::from_str(&text).unwrap();
        assert_eq!(rng.uniform(), back.uniform());
    }

    #[test]
    fn derived_seeds_differ_per_coordinate() {
        let a = derive_seed(1, &[0, 0]);
        let b = derive_seed(1, &[0, 1]);
        let c = derive_seed(1, &[1, 0]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(1, &[0, 0]));
    }
}
