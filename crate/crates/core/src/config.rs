//! Simulation configuration: loading, validation and experiment variants.
//!
//! The canonical document is JSON with the field names of
//! [`SimulationConfig`]. Unknown keys are rejected. A documented baseline
//! ships as `assets/baseline.json` and is also available through
//! [`SimulationConfig::baseline`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::moral::MoralType;

/// The shipped baseline document.
pub const BASELINE_JSON: &str = include_str!("../assets/baseline.json");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read config file: {0}")]
    Io(#[from] std::io::Error),

    #[error("failed to parse config document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("unknown experiment variant `{0}`")]
    UnknownVariant(String),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Base number of plant nodes before abundance scaling.
    #[serde(default = "default_plant_nodes")]
    pub node_count: u32,
    pub initial_quantity: u32,
    pub capacity: u32,
    pub respawn_delay: u32,
    /// HP restored per unit collected.
    pub nutrition: u32,
}

fn default_plant_nodes() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreyParams {
    pub initial_count: u32,
    pub hp_mean: f64,
    pub hp_std: f64,
    pub physical_ability: f64,
    /// Per empty slot, per step.
    pub respawn_rate: f64,
    pub max_count: u32,
    pub difficulty: f64,
    /// Damage dealt to a hunter whose attempt fails.
    #[serde(default = "default_counter_damage")]
    pub counter_damage: u32,
}

fn default_counter_damage() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmParams {
    pub provider_url: String,
    pub model_id: String,
    pub max_retries: u32,
    pub reflection_enabled: bool,
    /// Request timeout in seconds.
    pub timeout: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Environment variable holding the API key.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Serialized long-term memory limit per agent, in bytes.
    #[serde(default = "default_memory_cap")]
    pub memory_cap_bytes: usize,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

fn default_memory_cap() -> usize {
    16 * 1024
}

fn default_checkpoint_interval() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub max_time_steps: u32,
    pub social_rounds_per_step: u32,
    pub moral_type_visible: bool,
    pub initial_agent_count: u32,
    pub type_distribution: BTreeMap<MoralType, f64>,
    pub perception_window: u32,
    pub initial_hp: u32,
    pub max_hp: u32,
    pub initial_age: u32,
    pub max_age: u32,
    pub min_hp_repro: u32,
    pub hp_cost_repro: u32,
    pub min_age_repro: u32,
    pub offspring_hp: u32,
    pub pa_mean: f64,
    pub pa_std: f64,
    pub pa_slope: f64,
    pub pa_intercept: f64,
    pub plant_params: PlantParams,
    pub prey_params: PreyParams,
    pub resource_abundance: f64,
    pub metabolic_cost_per_step: u32,
    pub collect_cap: u32,
    pub message_max_length: u32,
    /// Steps between checkpoints written to the run directory.
    #[serde(default = "default_checkpoint_interval")]
    pub checkpoint_interval: u32,
    pub llm: LlmParams,
    pub rng_seed: u64,
}

impl SimulationConfig {
    pub fn baseline() -> Self {
        load_config(BASELINE_JSON).expect("shipped baseline config is valid")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        load_config(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_time_steps == 0 {
            return Err(invalid("max_time_steps", "must be positive"));
        }
        if self.social_rounds_per_step == 0 {
            return Err(invalid("social_rounds_per_step", "must be at least 1"));
        }
        if self.initial_agent_count == 0 {
            return Err(invalid("initial_agent_count", "must be positive"));
        }
        if self.perception_window == 0 {
            return Err(invalid("perception_window", "must be positive"));
        }
        for (ty, frac) in &self.type_distribution {
            if !(0.0..=1.0).contains(frac) || !frac.is_finite() {
                return Err(invalid(
                    "type_distribution",
                    format!("fraction for {ty} is {frac}, outside [0, 1]"),
                ));
            }
        }
        let sum: f64 = self.type_distribution.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            let shown = (sum * 1e9).round() / 1e9;
            return Err(invalid(
                "type_distribution",
                format!("distribution sums to {shown}"),
            ));
        }
        if self.initial_hp > self.max_hp {
            return Err(invalid("initial_hp", "must not exceed max_hp"));
        }
        if self.initial_age > self.max_age {
            return Err(invalid("initial_age", "must not exceed max_age"));
        }
        if self.min_hp_repro < 1 {
            return Err(invalid("min_hp_repro", "must be at least 1"));
        }
        if self.offspring_hp > self.max_hp {
            return Err(invalid("offspring_hp", "must not exceed max_hp"));
        }
        if !self.pa_mean.is_finite() || !self.pa_std.is_finite() || self.pa_std < 0.0 {
            return Err(invalid("pa_std", "must be finite and non-negative"));
        }
        if self.pa_slope == 0.0 || !self.pa_slope.is_finite() {
            return Err(invalid("pa_slope", "must be finite and non-zero"));
        }
        if !self.pa_intercept.is_finite() {
            return Err(invalid("pa_intercept", "must be finite"));
        }
        if self.plant_params.capacity == 0 {
            return Err(invalid("plant_params.capacity", "must be positive"));
        }
        let prey = &self.prey_params;
        if !(0.0..=1.0).contains(&prey.respawn_rate) {
            return Err(invalid(
                "prey_params.respawn_rate",
                format!("{} is outside [0, 1]", prey.respawn_rate),
            ));
        }
        if prey.initial_count > prey.max_count {
            return Err(invalid(
                "prey_params.initial_count",
                "must not exceed max_count",
            ));
        }
        if prey.hp_std < 0.0 || !prey.hp_std.is_finite() || !prey.hp_mean.is_finite() {
            return Err(invalid(
                "prey_params.hp_std",
                "must be finite and non-negative",
            ));
        }
        if prey.difficulty <= 0.0 || !prey.difficulty.is_finite() {
            return Err(invalid("prey_params.difficulty", "must be positive"));
        }
        if self.resource_abundance <= 0.0 || !self.resource_abundance.is_finite() {
            return Err(invalid("resource_abundance", "must be positive"));
        }
        if self.collect_cap == 0 {
            return Err(invalid("collect_cap", "must be positive"));
        }
        if self.message_max_length == 0 {
            return Err(invalid("message_max_length", "must be positive"));
        }
        if self.checkpoint_interval == 0 {
            return Err(invalid("checkpoint_interval", "must be positive"));
        }
        if self.llm.max_retries == 0 {
            return Err(invalid("llm.max_retries", "must be at least 1"));
        }
        if self.llm.timeout <= 0.0 || !self.llm.timeout.is_finite() {
            return Err(invalid("llm.timeout", "must be positive"));
        }
        Ok(())
    }

    /// Number of plant nodes after abundance scaling.
    pub fn plant_node_count(&self) -> u32 {
        scale_count(self.plant_params.node_count, self.resource_abundance)
    }

    pub fn initial_prey_count(&self) -> u32 {
        scale_count(self.prey_params.initial_count, self.resource_abundance)
    }

    pub fn max_prey_count(&self) -> u32 {
        scale_count(self.prey_params.max_count, self.resource_abundance)
    }

    /// Prey max HP implied by the configured mean: `round(hp_mean × difficulty)`.
    pub fn typical_prey_hp(&self) -> i64 {
        ((self.prey_params.hp_mean * self.prey_params.difficulty).round() as i64).max(1)
    }

    /// Hint shown to agents: hunters of average ability needed to finish a
    /// typical prey in one round, plus one.
    pub fn num_agents_to_kill(&self, prey_max_hp: i64) -> u32 {
        let per_hit = (self.pa_mean.floor() as i64).max(1);
        let hits = (prey_max_hp + per_hit - 1) / per_hit;
        hits.max(1) as u32 + 1
    }

    /// Moral type of each founder, in id order, by largest-remainder rounding.
    pub fn founder_types(&self) -> Vec<MoralType> {
        let n = self.initial_agent_count as f64;
        let mut counts: Vec<(MoralType, u32, f64)> = MoralType::ALL
            .iter()
            .map(|ty| {
                let exact = self.type_distribution.get(ty).copied().unwrap_or(0.0) * n;
                (*ty, exact.floor() as u32, exact - exact.floor())
            })
            .collect();
        let assigned: u32 = counts.iter().map(|c| c.1).sum();
        let mut leftover = self.initial_agent_count.saturating_sub(assigned);
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            counts[b]
                .2
                .partial_cmp(&counts[a].2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for idx in order {
            if leftover == 0 {
                break;
            }
            if counts[idx].2 > 0.0 {
                counts[idx].1 += 1;
                leftover -= 1;
            }
        }
        counts
            .into_iter()
            .flat_map(|(ty, count, _)| std::iter::repeat_n(ty, count as usize))
            .collect()
    }
}

fn scale_count(base: u32, abundance: f64) -> u32 {
    ((base as f64 * abundance).round() as u32).max(1)
}

/// Parses and validates a configuration document.
pub fn load_config(document: &str) -> Result<SimulationConfig, ConfigError> {
    let config: SimulationConfig = serde_json::from_str(document)?;
    config.validate()?;
    Ok(config)
}

/// Named experiment overlays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Baseline,
    ScarceResource,
    HighSocialCost,
    MoralInvisible,
    SingleType(MoralType),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Baseline => f.write_str("baseline"),
            Variant::ScarceResource => f.write_str("scarce_resource"),
            Variant::HighSocialCost => f.write_str("high_social_cost"),
            Variant::MoralInvisible => f.write_str("moral_invisible"),
            Variant::SingleType(ty) => write!(f, "single_type({ty})"),
        }
    }
}

impl FromStr for Variant {
    type Err = ConfigError;

    /// Accepts `single_type(kin)` and `single_type:kin`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = s.trim();
        match name {
            "baseline" => return Ok(Variant::Baseline),
            "scarce_resource" => return Ok(Variant::ScarceResource),
            "high_social_cost" => return Ok(Variant::HighSocialCost),
            "moral_invisible" => return Ok(Variant::MoralInvisible),
            _ => {}
        }
        let inner = name
            .strip_prefix("single_type(")
            .and_then(|rest| rest.strip_suffix(')'))
            .or_else(|| name.strip_prefix("single_type:"));
        match inner.map(MoralType::from_str) {
            Some(Ok(ty)) => Ok(Variant::SingleType(ty)),
            _ => Err(ConfigError::UnknownVariant(name.to_string())),
        }
    }
}

/// Applies a variant overlay; only the documented fields change.
pub fn apply_variant(base: &SimulationConfig, variant: Variant) -> SimulationConfig {
    let mut config = base.clone();
    match variant {
        Variant::Baseline => {}
        Variant::ScarceResource => config.resource_abundance = 1.0,
        Variant::HighSocialCost => config.social_rounds_per_step = 1,
        Variant::MoralInvisible => config.moral_type_visible = false,
        Variant::SingleType(only) => {
            config.type_distribution = MoralType::ALL
                .iter()
                .map(|ty| (*ty, if *ty == only { 1.0 } else { 0.0 }))
                .collect();
        }
    }
    config
}
