//! Prompt templates and their rendering against the live configuration.
//!
//! Templates use `{{name}}` for values and `{{#flag}}...{{/flag}}` /
//! `{{^flag}}...{{/flag}}` for text shown only when a flag is on or off.
//! Every number an agent reads about the rules comes from a substitution.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::action::{INIT_COST, MAX_SUCCESS, MIN_SUCCESS};
use crate::cognition::policy::THINKING_WORD_LIMIT;
use crate::cognition::ObservationBundle;
use crate::config::SimulationConfig;
use crate::moral::MoralType;

use super::client::ChatMessage;

/// Steps without a share before the memory schema suggests retaliation.
pub const SHARE_WAIT_STEPS: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("unknown placeholder `{0}`")]
    UnknownPlaceholder(String),
    #[error("unterminated tag in template")]
    Unterminated,
    #[error("cannot read prompt asset {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// The shipped prompt texts.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptAssets {
    pub moral: BTreeMap<MoralType, String>,
    pub basic: String,
    pub dynamics: String,
    pub input: String,
    pub output: String,
    pub reflection: String,
}

const FILES: [&str; 5] = ["basic.md", "dynamics.md", "input.md", "output.md", "reflection.md"];

fn moral_file(t: MoralType) -> String {
    format!("moral_{}.md", t.as_str())
}

impl Default for PromptAssets {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptAssets {
    pub fn builtin() -> Self {
        let moral = [
            (MoralType::Universal, include_str!("../../assets/prompts/moral_universal.md")),
            (MoralType::Reciprocal, include_str!("../../assets/prompts/moral_reciprocal.md")),
            (MoralType::Kin, include_str!("../../assets/prompts/moral_kin.md")),
            (MoralType::Selfish, include_str!("../../assets/prompts/moral_selfish.md")),
        ]
        .into_iter()
        .map(|(t, s)| (t, s.to_string()))
        .collect();
        Self {
            moral,
            basic: include_str!("../../assets/prompts/basic.md").into(),
            dynamics: include_str!("../../assets/prompts/dynamics.md").into(),
            input: include_str!("../../assets/prompts/input.md").into(),
            output: include_str!("../../assets/prompts/output.md").into(),
            reflection: include_str!("../../assets/prompts/reflection.md").into(),
        }
    }

    /// Loads templates from a directory laid out like `assets/prompts`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        let mut moral = BTreeMap::new();
        for t in MoralType::ALL {
            moral.insert(t, read(&moral_file(t))?);
        }
        let [basic, dynamics, input, output, reflection] = FILES.map(read);
        Ok(Self {
            moral,
            basic: basic?,
            dynamics: dynamics?,
            input: input?,
            output: output?,
            reflection: reflection?,
        })
    }

    /// Every template that is rendered against the configuration.
    pub fn system_templates(&self) -> [(&'static str, &str); 5] {
        [
            ("basic", &self.basic),
            ("dynamics", &self.dynamics),
            ("input", &self.input),
            ("output", &self.output),
            ("reflection", &self.reflection),
        ]
    }

    /// Moral prompt followed by the rendered system prompts.
    pub fn system_message(&self, config: &SimulationConfig, moral: MoralType) -> Result<String, PromptError> {
        let ctx = PromptContext::from_config(config);
        let mut parts = vec![self.moral[&moral].trim_end().to_string()];
        for (title, body) in [
            ("System Prompt - Basic", &self.basic),
            ("System Prompt - Environment Dynamics", &self.dynamics),
            ("System Prompt - Input Content Instruction", &self.input),
            ("System Prompt - Output Content Instruction", &self.output),
        ] {
            parts.push(format!("## {title}\n\n{}", ctx.render(body)?.trim_end()));
        }
        Ok(parts.join("\n\n"))
    }

    pub fn reflection_message(&self, config: &SimulationConfig) -> Result<String, PromptError> {
        Ok(PromptContext::from_config(config).render(&self.reflection)?.trim_end().to_string())
    }

    /// System message plus the observation as the user message.
    pub fn build_messages(
        &self,
        config: &SimulationConfig,
        bundle: &ObservationBundle,
    ) -> Result<Vec<ChatMessage>, PromptError> {
        Ok(vec![
            ChatMessage::system(self.system_message(config, bundle.self_status.moral_type)?),
            ChatMessage::user(observation_message(bundle)),
        ])
    }
}

/// The user turn: a short header then the observation as JSON.
pub fn observation_message(bundle: &ObservationBundle) -> String {
    let kind = match bundle.round_kind {
        crate::action::RoundKind::Social => "social interaction",
        crate::action::RoundKind::Production => "production",
    };
    let legal: Vec<&str> = bundle.legal_actions.iter().map(|k| k.as_str()).collect();
    let mut text = format!(
        "You are {}. Time step {}, round {} ({kind} round). Allowed actions this round: {}.\n",
        bundle.agent_id(),
        bundle.step,
        bundle.round_index,
        legal.join(", ")
    );
    if let Some(s) = &bundle.scenario {
        text.push_str(&s.instruction());
        text.push('\n');
    }
    text.push_str("Observation:\n");
    text.push_str(&serde_json::to_string_pretty(bundle).expect("bundle serializes"));
    text
}

/// Values and flags available to templates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PromptContext {
    pub values: BTreeMap<&'static str, String>,
    pub flags: BTreeMap<&'static str, bool>,
}

fn pct(p: f64) -> String {
    format!("{}", (p * 100.0).round() as i64)
}

impl PromptContext {
    pub fn from_config(c: &SimulationConfig) -> Self {
        let typical_hp = c.typical_prey_hp();
        let values = [
            ("social_rounds", c.social_rounds_per_step.to_string()),
            ("max_age", c.max_age.to_string()),
            ("max_hp", c.max_hp.to_string()),
            ("metabolic_cost", c.metabolic_cost_per_step.to_string()),
            ("hp_cost_repro", c.hp_cost_repro.to_string()),
            ("min_age_repro", c.min_age_repro.to_string()),
            ("min_hp_repro", c.min_hp_repro.to_string()),
            ("offspring_hp", c.offspring_hp.to_string()),
            ("plant_nutrition", c.plant_params.nutrition.to_string()),
            ("collect_cap", c.collect_cap.to_string()),
            ("plant_respawn_delay", c.plant_params.respawn_delay.to_string()),
            ("min_success_pct", pct(MIN_SUCCESS)),
            ("max_success_pct", pct(MAX_SUCCESS)),
            ("prey_counter_damage", c.prey_params.counter_damage.to_string()),
            ("typical_prey_hp", typical_hp.to_string()),
            ("typical_agents_to_kill", c.num_agents_to_kill(typical_hp).to_string()),
            ("init_cost", INIT_COST.to_string()),
            ("message_max_length", c.message_max_length.to_string()),
            ("perception_window", c.perception_window.to_string()),
            ("thinking_word_limit", THINKING_WORD_LIMIT.to_string()),
            ("share_wait_steps", SHARE_WAIT_STEPS.to_string()),
            ("memory_cap_bytes", c.llm.memory_cap_bytes.to_string()),
        ]
        .into_iter()
        .collect();
        let flags = [
            ("visible", c.moral_type_visible),
            ("reflection", c.llm.reflection_enabled),
        ]
        .into_iter()
        .collect();
        Self { values, flags }
    }

    pub fn render(&self, template: &str) -> Result<String, PromptError> {
        let mut out = String::with_capacity(template.len());
        let mut rest = template;
        // Stack of (flag, shown?) for open sections.
        let mut sections: Vec<(String, bool)> = Vec::new();
        let visible = |sections: &[(String, bool)]| sections.iter().all(|(_, on)| *on);
        while let Some(open) = rest.find("{{") {
            if visible(&sections) {
                out.push_str(&rest[..open]);
            }
            let after = &rest[open + 2..];
            let close = after.find("}}").ok_or(PromptError::Unterminated)?;
            let tag = after[..close].trim();
            rest = &after[close + 2..];
            if let Some(name) = tag.strip_prefix('#') {
                let on = *self.flags.get(name).ok_or_else(|| PromptError::UnknownPlaceholder(name.into()))?;
                sections.push((name.to_string(), on));
            } else if let Some(name) = tag.strip_prefix('^') {
                let on = *self.flags.get(name).ok_or_else(|| PromptError::UnknownPlaceholder(name.into()))?;
                sections.push((name.to_string(), !on));
            } else if let Some(name) = tag.strip_prefix('/') {
                match sections.pop() {
                    Some((open_name, _)) if open_name == name => {}
                    _ => return Err(PromptError::Unterminated),
                }
            } else {
                let value = self
                    .values
                    .get(tag)
                    .ok_or_else(|| PromptError::UnknownPlaceholder(tag.into()))?;
                if visible(&sections) {
                    out.push_str(value);
                }
            }
        }
        if !sections.is_empty() {
            return Err(PromptError::Unterminated);
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// Numbers in `text` that are not list markers such as `2.`, `1.1.` or `(3)`.
pub fn numeric_literals(text: &str) -> Vec<String> {
    let mut found = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim_start_matches(|c: char| c.is_whitespace() || c == '*');
        let body = strip_list_marker(trimmed);
        let chars: Vec<char> = body.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_ascii_digit() {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || (chars[i] == '.' && i + 1 < chars.len() && chars[i + 1].is_ascii_digit())) {
                    i += 1;
                }
                found.push(chars[start..i].iter().collect());
            } else {
                i += 1;
            }
        }
    }
    found
}

fn strip_list_marker(line: &str) -> &str {
    if let Some(inner) = line.strip_prefix('(') {
        if let Some(end) = inner.find(')') {
            if end > 0 && inner[..end].chars().all(|c| c.is_ascii_digit()) {
                return &inner[end + 1..];
            }
        }
    }
    let marker_len = line
        .char_indices()
        .take_while(|(_, c)| c.is_ascii_digit() || *c == '.')
        .map(|(i, c)| i + c.len_utf8())
        .last()
        .unwrap_or(0);
    if marker_len > 0 && line[..marker_len].ends_with('.') && line[marker_len..].starts_with(' ') {
        &line[marker_len..]
    } else {
        line
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{apply_variant, Variant};

    #[test]
    fn kin_system_message_starts_with_kin_prompt() {
        let config = SimulationConfig::baseline();
        let msg = PromptAssets::builtin().system_message(&config, MoralType::Kin).unwrap();
        assert!(msg.starts_with("You are a kin-based moral agent"));
    }

    #[test]
    fn respawn_delay_comes_from_config() {
        let mut config = SimulationConfig::baseline();
        let msg = PromptAssets::builtin().system_message(&config, MoralType::Selfish).unwrap();
        assert!(msg.contains("it takes 10 steps to respawn"));
        config.plant_params.respawn_delay = 20;
        let msg = PromptAssets::builtin().system_message(&config, MoralType::Selfish).unwrap();
        assert!(msg.contains("it takes 20 steps to respawn"));
    }

    #[test]
    fn visibility_sentences_follow_config() {
        let assets = PromptAssets::builtin();
        let base = SimulationConfig::baseline();
        let seen = assets.system_message(&base, MoralType::Universal).unwrap();
        assert!(seen.contains("You can view the other agents' moral type"));
        let hidden_cfg = apply_variant(&base, Variant::MoralInvisible);
        let hidden = assets.system_message(&hidden_cfg, MoralType::Universal).unwrap();
        assert!(hidden.contains("You cannot view the other agents' moral type"));
        assert!(!hidden.contains("you are able to view others moral type"));
    }

    #[test]
    fn unknown_placeholder_is_an_error() {
        let ctx = PromptContext::from_config(&SimulationConfig::baseline());
        assert!(matches!(ctx.render("{{nope}}"), Err(PromptError::UnknownPlaceholder(_))));
        assert!(matches!(ctx.render("{{#visible}}open"), Err(PromptError::Unterminated)));
        assert_eq!(ctx.render("a{{^visible}}x{{/visible}}b").unwrap(), "ab");
    }

    #[test]
    fn list_markers_are_not_literals() {
        assert!(numeric_literals("1. first\n1.1. nested\n    ** (2) item\n*   3. star").is_empty());
        assert_eq!(numeric_literals("2. costs 10 HP and 0.5"), vec!["10", "0.5"]);
    }

    #[test]
    fn identical_inputs_give_identical_messages() {
        let config = SimulationConfig::baseline();
        let state = crate::world::initialize_world(&config);
        let phase = crate::action::RoundPhase::social(1, 0);
        let a = crate::cognition::assemble_observation(&state, &config, &[], "agent_0", &phase).unwrap();
        let assets = PromptAssets::builtin();
        assert_eq!(assets.build_messages(&config, &a).unwrap(), assets.build_messages(&config, &a).unwrap());
    }
}
