//! The validation-with-retry loop and the LLM-backed policy.

use std::collections::VecDeque;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::client::{ChatClient, ChatError, ChatMessage, ChatRequest};
use super::prompts::PromptAssets;
use crate::cognition::{
    parse_response, validate_context, DecisionFailure, ObservationBundle, PolicyBackend, PolicyResponse,
    ValidationLimits,
};
use crate::config::{LlmParams, SimulationConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct GatewaySettings {
    pub model: String,
    pub temperature: f64,
    pub timeout: f64,
    pub max_retries: u32,
    pub reflection_enabled: bool,
}

impl From<&LlmParams> for GatewaySettings {
    fn from(p: &LlmParams) -> Self {
        Self {
            model: p.model_id.clone(),
            temperature: p.temperature,
            timeout: p.timeout,
            max_retries: p.max_retries,
            reflection_enabled: p.reflection_enabled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptStage {
    Initial,
    Retry,
    Reflection,
}

/// One model call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub stage: AttemptStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    /// Transport failure; `raw` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport_error: Option<String>,
    /// Why the response was rejected, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_error: Option<String>,
}

/// Audit record of a decision's conversation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub model: String,
    pub temperature: f64,
    pub timeout: f64,
    pub messages: Vec<ChatMessage>,
    pub attempts: Vec<Attempt>,
    /// Failed calls (transport or validation).
    pub retry_count: u32,
    pub succeeded: bool,
}

fn schema_feedback(error: &str) -> String {
    format!(
        "Your previous response was rejected: {error}. Answer again with a single JSON object in the required format."
    )
}

fn context_feedback(errors: &[String]) -> String {
    let mut text = String::from("Your previous response was rejected because:\n");
    for e in errors {
        text.push_str("- ");
        text.push_str(e);
        text.push('\n');
    }
    text.push_str("Revise your plan and answer again with a single JSON object in the required format.");
    text
}

/// Calls the model until a response passes both validation layers.
///
/// Feedback is appended to the conversation. With reflection enabled the
/// first accepted response is followed by the reflection prompt and only the
/// second accepted response is kept. Each failed call uses up one retry;
/// reaching `max_retries` failures ends the decision.
pub fn decide_with_validation(
    client: &mut dyn ChatClient,
    settings: &GatewaySettings,
    messages: Vec<ChatMessage>,
    reflection_prompt: &str,
    bundle: &ObservationBundle,
    limits: &ValidationLimits,
) -> (Result<PolicyResponse, DecisionFailure>, ChatExchange) {
    let mut exchange = ChatExchange {
        model: settings.model.clone(),
        temperature: settings.temperature,
        timeout: settings.timeout,
        messages: messages.clone(),
        attempts: Vec::new(),
        retry_count: 0,
        succeeded: false,
    };
    let mut conversation = messages;
    let mut reflected = !settings.reflection_enabled;
    let mut stage = AttemptStage::Initial;
    let mut last_error = String::from("no attempt made");
    loop {
        if exchange.retry_count >= settings.max_retries {
            let failure = DecisionFailure {
                attempts: exchange.attempts.len() as u32,
                last_error,
            };
            return (Err(failure), exchange);
        }
        let request = ChatRequest {
            model: settings.model.clone(),
            messages: conversation.clone(),
            temperature: settings.temperature,
            timeout: settings.timeout,
        };
        let mut attempt = Attempt {
            stage,
            raw: None,
            transport_error: None,
            validation_error: None,
        };
        let text = match client.complete(&request) {
            Ok(text) => text,
            Err(e) => {
                last_error = e.to_string();
                attempt.transport_error = Some(last_error.clone());
                exchange.attempts.push(attempt);
                exchange.retry_count += 1;
                stage = AttemptStage::Retry;
                continue;
            }
        };
        attempt.raw = Some(text.clone());
        let verdict = parse_response(&text).map_err(|e| (schema_feedback(&e), e)).and_then(|r| {
            validate_context(&r, bundle, limits)
                .map(|_| r)
                .map_err(|errs| (context_feedback(&errs), errs.join("; ")))
        });
        conversation.push(ChatMessage::assistant(text));
        match verdict {
            Err((feedback, error)) => {
                last_error = error.clone();
                attempt.validation_error = Some(error);
                exchange.attempts.push(attempt);
                exchange.retry_count += 1;
                conversation.push(ChatMessage::user(feedback));
                stage = AttemptStage::Retry;
            }
            Ok(response) => {
                exchange.attempts.push(attempt);
                if reflected {
                    exchange.succeeded = true;
                    return (Ok(response), exchange);
                }
                reflected = true;
                conversation.push(ChatMessage::user(reflection_prompt));
                stage = AttemptStage::Reflection;
            }
        }
    }
}

/// A transcript line: one decision of one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// Global call order within the run, for replay.
    pub call_seq: u64,
    pub agent_id: String,
    pub step: u32,
    pub round_index: u32,
    pub exchange: ChatExchange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Policy backed by a chat model.
pub struct LlmPolicy<C: ChatClient> {
    client: C,
    assets: PromptAssets,
    config: SimulationConfig,
    settings: GatewaySettings,
    limits: ValidationLimits,
    transcript_dir: Option<PathBuf>,
    call_seq: u64,
}

impl<C: ChatClient> LlmPolicy<C> {
    pub fn new(client: C, config: &SimulationConfig) -> Self {
        Self::with_assets(client, config, PromptAssets::builtin())
    }

    pub fn with_assets(client: C, config: &SimulationConfig, assets: PromptAssets) -> Self {
        Self {
            client,
            assets,
            config: config.clone(),
            settings: GatewaySettings::from(&config.llm),
            limits: ValidationLimits::from_config(config),
            transcript_dir: None,
            call_seq: 0,
        }
    }

    pub fn client(&self) -> &C {
        &self.client
    }

    fn record(&self, entry: &TranscriptEntry) {
        let Some(dir) = &self.transcript_dir else { return };
        let write = || -> std::io::Result<()> {
            fs::create_dir_all(dir)?;
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(format!("{}.jsonl", entry.agent_id)))?;
            writeln!(f, "{}", serde_json::to_string(entry).expect("transcript serializes"))
        };
        if let Err(e) = write() {
            eprintln!("warning: cannot write transcript: {e}");
        }
    }
}

impl<C: ChatClient> PolicyBackend for LlmPolicy<C> {
    fn decide(&mut self, bundle: &ObservationBundle) -> Result<PolicyResponse, DecisionFailure> {
        let prompt_failure = |e: super::prompts::PromptError| DecisionFailure {
            attempts: 0,
            last_error: e.to_string(),
        };
        let messages = self.assets.build_messages(&self.config, bundle).map_err(prompt_failure)?;
        let reflection = self.assets.reflection_message(&self.config).map_err(prompt_failure)?;
        let (result, exchange) = decide_with_validation(
            &mut self.client,
            &self.settings,
            messages,
            &reflection,
            bundle,
            &self.limits,
        );
        let entry = TranscriptEntry {
            call_seq: self.call_seq,
            agent_id: bundle.agent_id().to_string(),
            step: bundle.step,
            round_index: bundle.round_index,
            exchange,
            failure: result.as_ref().err().map(|f| f.to_string()),
        };
        self.call_seq += 1;
        self.record(&entry);
        result
    }

    fn name(&self) -> String {
        format!("llm:{}", self.settings.model)
    }

    /// Numbering continues after any calls already recorded in `dir`.
    fn set_transcript_dir(&mut self, dir: &Path) {
        if let Ok(entries) = read_transcripts(dir) {
            if let Some(last) = entries.iter().map(|e| e.call_seq).max() {
                self.call_seq = self.call_seq.max(last + 1);
            }
        }
        self.transcript_dir = Some(dir.to_path_buf());
    }
}

/// Replays the model outputs recorded in a transcripts directory.
#[derive(Clone, Debug, Default)]
pub struct ReplayChatClient {
    replies: VecDeque<Result<String, ChatError>>,
}

impl ReplayChatClient {
    pub fn from_entries(mut entries: Vec<TranscriptEntry>) -> Self {
        entries.sort_by_key(|e| e.call_seq);
        let replies = entries
            .into_iter()
            .flat_map(|e| e.exchange.attempts)
            .map(|a| match (a.raw, a.transport_error) {
                (Some(raw), _) => Ok(raw),
                (None, Some(err)) => Err(ChatError::Transport(err)),
                (None, None) => Err(ChatError::Transport("empty attempt".into())),
            })
            .collect();
        Self { replies }
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::from_entries(read_transcripts(dir)?))
    }
}

impl ChatClient for ReplayChatClient {
    fn complete(&mut self, _request: &ChatRequest) -> Result<String, ChatError> {
        self.replies
            .pop_front()
            .unwrap_or_else(|| Err(ChatError::Transport("transcript exhausted".into())))
    }
}

/// Reads every `*.jsonl` transcript file in `dir`.
pub fn read_transcripts(dir: impl AsRef<Path>) -> std::io::Result<Vec<TranscriptEntry>> {
    let mut entries = Vec::new();
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    for path in files {
        for line in fs::read_to_string(&path)?.lines().filter(|l| !l.trim().is_empty()) {
            let entry = serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            entries.push(entry);
        }
    }
    Ok(entries)
}
