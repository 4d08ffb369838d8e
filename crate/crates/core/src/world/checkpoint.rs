use serde::{Deserialize, Serialize};

use super::WorldState;
use crate::config::SimulationConfig;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint was written for config {found}, active config is {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("corrupt checkpoint: {0}")]
    Corrupt(#[from] serde_json::Error),
}

/// A full snapshot taken at the end of a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    /// Last completed step.
    pub step: u32,
    /// Number of event records written when the snapshot was taken.
    pub event_log_len: u64,
    /// The RNG state travels inside `state`.
    pub state: WorldState,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn file_name(step: u32) -> String {
        format!("checkpoint_{step}.json")
    }
}

pub fn snapshot(state: &WorldState, config: &SimulationConfig, event_log_len: u64) -> Checkpoint {
    Checkpoint {
        config_hash: config.hash(),
        step: state.step,
        event_log_len,
        state: state.clone(),
    }
}

pub fn restore(
    checkpoint: &Checkpoint,
    config: &SimulationConfig,
) -> Result<WorldState, CheckpointError> {
    let expected = config.hash();
    if checkpoint.config_hash != expected {
        return Err(CheckpointError::HashMismatch {
            expected,
            found: checkpoint.config_hash.clone(),
        });
    }
    Ok(checkpoint.state.clone())
}
