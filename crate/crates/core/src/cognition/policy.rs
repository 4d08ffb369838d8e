//! The policy contract and the two validation layers applied to responses.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::memory::{MemoryDocument, ShortTermPlan};
use super::observation::ObservationBundle;
use crate::action::Action;
use crate::config::SimulationConfig;

pub const THINKING_WORD_LIMIT: usize = 500;

/// One decision, field names exactly as agents are instructed to emit them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyResponse {
    pub agent_id: String,
    pub thinking: String,
    pub long_term_memory: MemoryDocument,
    pub short_term_plan: ShortTermPlan,
    pub action: Action,
}

impl PolicyResponse {
    /// A response that keeps the agent's memory and plan and does nothing.
    pub fn idle(bundle: &ObservationBundle, thinking: impl Into<String>) -> Self {
        Self {
            agent_id: bundle.agent_id().to_string(),
            thinking: thinking.into(),
            long_term_memory: bundle.long_term_memory.clone(),
            short_term_plan: bundle.short_term_plan.clone(),
            action: Action::DoNothing,
        }
    }
}

/// The backend could not produce an acceptable response within its budget.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("decision failed after {attempts} attempts: {last_error}")]
pub struct DecisionFailure {
    pub attempts: u32,
    pub last_error: String,
}

/// Anything that can turn an observation into a decision.
pub trait PolicyBackend {
    fn decide(&mut self, bundle: &ObservationBundle) -> Result<PolicyResponse, DecisionFailure>;

    /// Label recorded in run metadata.
    fn name(&self) -> String;

    /// Directory where per-agent transcripts should be written, if any.
    fn set_transcript_dir(&mut self, _dir: &Path) {}
}

impl<P: PolicyBackend + ?Sized> PolicyBackend for Box<P> {
    fn decide(&mut self, bundle: &ObservationBundle) -> Result<PolicyResponse, DecisionFailure> {
        (**self).decide(bundle)
    }

    fn name(&self) -> String {
        (**self).name()
    }

    fn set_transcript_dir(&mut self, dir: &Path) {
        (**self).set_transcript_dir(dir)
    }
}

/// Config-derived limits for contextual checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationLimits {
    pub collect_cap: u32,
    pub message_max_length: usize,
    pub memory_cap_bytes: usize,
}

impl ValidationLimits {
    pub fn from_config(config: &SimulationConfig) -> Self {
        Self {
            collect_cap: config.collect_cap,
            message_max_length: config.message_max_length as usize,
            memory_cap_bytes: config.llm.memory_cap_bytes,
        }
    }
}

/// Returns the slice from the first `{` to the last `}`.
pub fn extract_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

/// Syntactic and schema check of raw model output.
pub fn parse_response(text: &str) -> Result<PolicyResponse, String> {
    let body =
        extract_json_object(text).ok_or_else(|| "response contains no JSON object".to_string())?;
    let response: PolicyResponse = serde_json::from_str(body)
        .map_err(|e| format!("response does not match the required format: {e}"))?;
    check_schema(&response)?;
    Ok(response)
}

/// Schema rules serde cannot express.
pub fn check_schema(response: &PolicyResponse) -> Result<(), String> {
    let words = response.thinking.split_whitespace().count();
    if words > THINKING_WORD_LIMIT {
        return Err(format!(
            "thinking has {words} words, limit is {THINKING_WORD_LIMIT}"
        ));
    }
    response.long_term_memory.check()
}

/// Checks a schema-valid response against what the agent can actually see.
/// Every problem found is reported as a human-readable line.
pub fn validate_context(
    response: &PolicyResponse,
    bundle: &ObservationBundle,
    limits: &ValidationLimits,
) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    let me = &bundle.self_status;
    if response.agent_id != me.agent_id {
        errors.push(format!(
            "agent_id must be {}, got {}",
            me.agent_id, response.agent_id
        ));
    }
    let kind = response.action.kind();
    if !bundle.legal_actions.contains(&kind) {
        let legal: Vec<&str> = bundle.legal_actions.iter().map(|k| k.as_str()).collect();
        errors.push(format!(
            "{kind} is not allowed this round; choose one of {}",
            legal.join(", ")
        ));
    }
    let living_other = |id: &str, errors: &mut Vec<String>| -> Option<i64> {
        if id == me.agent_id {
            errors.push(format!("{id} is yourself"));
            return None;
        }
        match bundle.other(id) {
            Some(o) => Some(o.hp),
            None => {
                errors.push(format!("agent {id} does not exist or is not alive"));
                None
            }
        }
    };
    match &response.action {
        Action::Collect { target, quantity } => match bundle
            .environment
            .plants
            .iter()
            .find(|p| &p.plant_id == target)
        {
            None => errors.push(format!("plant {target} does not exist")),
            Some(p) => {
                if *quantity == 0 {
                    errors.push("quantity must be at least 1".into());
                } else if *quantity > p.quantity {
                    errors.push(format!(
                        "{target} has only {} units, you asked for {quantity}",
                        p.quantity
                    ));
                }
                if *quantity > limits.collect_cap {
                    errors.push(format!(
                        "at most {} units can be collected at once",
                        limits.collect_cap
                    ));
                }
            }
        },
        Action::Hunt { target } => {
            if !bundle.environment.prey.iter().any(|p| &p.prey_id == target) {
                errors.push(format!("prey {target} does not exist"));
            }
        }
        Action::Reproduce => {
            if !me.can_reproduce {
                errors.push("you do not meet the age and HP requirements to reproduce".into());
            }
        }
        Action::Allocate { allocation_plan } => {
            if allocation_plan.is_empty() {
                errors.push("allocation_plan is empty".into());
            }
            for (target, amount) in allocation_plan {
                living_other(target, &mut errors);
                if *amount == 0 {
                    errors.push(format!("allocation to {target} must be positive"));
                }
            }
            let total: i64 = allocation_plan.values().map(|v| *v as i64).sum();
            if total >= me.hp {
                errors.push(format!(
                    "you have {} HP and cannot give away {total}; your HP must stay above zero",
                    me.hp
                ));
            }
        }
        Action::Communicate {
            recipients,
            message,
            ..
        } => {
            if recipients.is_empty() {
                errors.push("recipients is empty".into());
            }
            for r in recipients {
                living_other(r, &mut errors);
            }
            let len = message.chars().count();
            if len > limits.message_max_length {
                errors.push(format!(
                    "message has {len} characters, limit is {}",
                    limits.message_max_length
                ));
            }
            if message.contains(':') {
                errors.push("message must not contain colons".into());
            }
        }
        Action::Fight { target } => {
            living_other(target, &mut errors);
        }
        Action::Rob { target, amount } => {
            if let Some(hp) = living_other(target, &mut errors) {
                if *amount as i64 > hp {
                    errors.push(format!("{target} has only {hp} HP, you asked for {amount}"));
                }
            }
            if *amount == 0 {
                errors.push("rob amount must be positive".into());
            }
        }
        Action::DoNothing => {}
    }
    let size = response.long_term_memory.serialized_len();
    if size > limits.memory_cap_bytes {
        errors.push(format!(
            "long_term_memory is {size} bytes, limit is {} bytes; condense it",
            limits.memory_cap_bytes
        ));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
