//! Structured long-term memory and short-term plan carried between rounds.
//!
//! The engine stores whatever document a policy returns and hands it back
//! unchanged on the agent's next decision.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const NO_CONTENT: &str = "no content yet";

pub const PREY_SECTION: &str =
    "Prey_Hunting_Collaboration_Distribution_Retaliation_Memory_And_Planning";
pub const AGENT_SECTION: &str = "Agent_Specific_Memory";
pub const FAMILY_SECTION: &str = "Family_Plan";
pub const REPRODUCTION_SECTION: &str = "Plan_For_Reproduction";
pub const STRATEGY_SECTION: &str = "Strategies";

/// Lifecycle of a hunt from an agent's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetaliationStage {
    ClosedWithFairShare,
    KeepHunting,
    WaitAndAskForSharing,
    WarnAndPlanForRetaliation,
    ExecuteRetaliation,
    FinishedRetaliation,
    GiveUpRetaliation,
}

impl RetaliationStage {
    pub const NAMES: [&'static str; 7] = [
        "closed_with_fair_share",
        "keep_hunting",
        "wait_and_ask_for_sharing",
        "warn_and_plan_for_retaliation",
        "execute_retaliation",
        "finished_retaliation",
        "give_up_retaliation",
    ];
}

/// Interaction kinds that may be recorded in the per-agent history.
pub const INTERACTION_KINDS: [&str; 3] = ["fight", "rob", "allocate"];

/// The five mandatory long-term memory sections. Section bodies are free-form
/// JSON; [`MemoryDocument::check`] enforces the enumerated subfields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryDocument {
    #[serde(rename = "Prey_Hunting_Collaboration_Distribution_Retaliation_Memory_And_Planning")]
    pub prey_hunting: Value,
    #[serde(rename = "Agent_Specific_Memory")]
    pub agent_specific: Value,
    #[serde(rename = "Family_Plan")]
    pub family_plan: Value,
    #[serde(rename = "Plan_For_Reproduction")]
    pub reproduction_plan: Value,
    #[serde(rename = "Strategies")]
    pub strategies: Value,
}

impl Default for MemoryDocument {
    fn default() -> Self {
        let empty = || Value::String(NO_CONTENT.to_string());
        Self {
            prey_hunting: empty(),
            agent_specific: empty(),
            family_plan: empty(),
            reproduction_plan: empty(),
            strategies: empty(),
        }
    }
}

fn is_blank(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::String(s) => s.is_empty() || s == NO_CONTENT,
        _ => false,
    }
}

impl MemoryDocument {
    pub fn is_empty(&self) -> bool {
        [
            &self.prey_hunting,
            &self.agent_specific,
            &self.family_plan,
            &self.reproduction_plan,
            &self.strategies,
        ]
        .into_iter()
        .all(is_blank)
    }

    pub fn serialized_len(&self) -> usize {
        serde_json::to_vec(self)
            .map(|v| v.len())
            .unwrap_or(usize::MAX)
    }

    /// Checks the enumerated fields: hunt stages and interaction kinds.
    pub fn check(&self) -> Result<(), String> {
        if let Value::Object(preys) = &self.prey_hunting {
            for (prey_id, entry) in preys {
                let stage = entry.get("plan_next").and_then(|p| p.get("stage"));
                if let Some(stage) = stage {
                    if is_blank(stage) {
                        continue;
                    }
                    let ok = stage
                        .as_str()
                        .map(|s| RetaliationStage::NAMES.contains(&s))
                        .unwrap_or(false);
                    if !ok {
                        return Err(format!(
                            "{PREY_SECTION}.{prey_id}.plan_next.stage must be one of {:?}, got {stage}",
                            RetaliationStage::NAMES
                        ));
                    }
                }
            }
        }
        if let Value::Object(agents) = &self.agent_specific {
            for (agent_id, entry) in agents {
                let Some(history) = entry.get("important_interaction_history") else {
                    continue;
                };
                for side in ["what_i_did_to_him", "what_he_did_to_me"] {
                    let kind = history.get(side).and_then(|s| s.get("action_type"));
                    if let Some(kind) = kind {
                        if is_blank(kind) {
                            continue;
                        }
                        let ok = kind
                            .as_str()
                            .map(|s| INTERACTION_KINDS.contains(&s))
                            .unwrap_or(false);
                        if !ok {
                            return Err(format!(
                                "{AGENT_SECTION}.{agent_id}.important_interaction_history.{side}.action_type must be fight, rob or allocate, got {kind}"
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortTermPlan {
    #[serde(alias = "reasoning")]
    pub reasoning_for_prioritizing_plans_and_goals: String,
    pub next_steps_plan: Value,
}

impl Default for ShortTermPlan {
    fn default() -> Self {
        Self {
            reasoning_for_prioritizing_plans_and_goals: NO_CONTENT.to_string(),
            next_steps_plan: Value::String(NO_CONTENT.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn newborn_memory_is_all_placeholder() {
        let doc = MemoryDocument::default();
        assert!(doc.is_empty());
        let v = serde_json::to_value(&doc).unwrap();
        assert_eq!(v.as_object().unwrap().len(), 5);
        for (_, section) in v.as_object().unwrap() {
            assert_eq!(section, NO_CONTENT);
        }
    }

    #[test]
    fn missing_section_fails_to_parse() {
        let v = json!({
            PREY_SECTION: {}, AGENT_SECTION: {}, FAMILY_SECTION: {}, REPRODUCTION_SECTION: {}
        });
        assert!(serde_json::from_value::<MemoryDocument>(v).is_err());
    }

    #[test]
    fn stage_enum_is_enforced() {
        let mut doc = MemoryDocument::default();
        doc.prey_hunting = json!({"prey_3": {"plan_next": {"stage": "keep_hunting"}}});
        doc.check().unwrap();
        doc.prey_hunting = json!({"prey_3": {"plan_next": {"stage": "revenge_now"}}});
        assert!(doc.check().unwrap_err().contains("prey_3"));
    }

    #[test]
    fn interaction_kind_enum_is_enforced() {
        let mut doc = MemoryDocument::default();
        doc.agent_specific = json!({"agent_2": {"important_interaction_history": {
            "what_i_did_to_him": {"action_type": "allocate"},
            "what_he_did_to_me": {"action_type": ""}
        }}});
        doc.check().unwrap();
        doc.agent_specific = json!({"agent_2": {"important_interaction_history": {
            "what_he_did_to_me": {"action_type": "communicate"}
        }}});
        assert!(doc.check().is_err());
    }
}
