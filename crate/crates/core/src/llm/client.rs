//! Chat-completion transport.

use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    /// Seconds.
    pub timeout: f64,
}

impl ChatRequest {
    pub fn payload(&self) -> Value {
        json!({
            "model": self.model,
            "messages": self.messages,
            "temperature": self.temperature,
        })
    }
}

/// Every variant is retryable.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ChatError {
    #[error("request timed out")]
    Timeout,
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unparseable response body: {0}")]
    Body(String),
}

pub trait ChatClient {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, ChatError>;
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, ChatError> {
        (**self).complete(request)
    }
}

/// Extracts `choices[0].message.content` from a chat-completion body.
pub fn response_content(body: &str) -> Result<String, ChatError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ChatError::Body(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ChatError::Body("missing choices[0].message.content".into()))
}

/// Client for any server speaking the common chat-completions wire format.
pub struct HttpChatClient {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: f64) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(timeout)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            agent,
        }
    }

    /// Reads the key from `env_var`; `None` if unset or empty.
    pub fn key_from_env(env_var: &str) -> Option<String> {
        std::env::var(env_var).ok().filter(|k| !k.trim().is_empty())
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, ChatError> {
        let mut req = self.agent.post(self.endpoint());
        if request.timeout > 0.0 {
            req = req
                .config()
                .timeout_global(Some(Duration::from_secs_f64(request.timeout)))
                .build();
        }
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = req.send_json(request.payload()).map_err(map_error)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(map_error)?;
        if !(200..300).contains(&status) {
            return Err(ChatError::Status { status, body });
        }
        response_content(&body)
    }
}

fn map_error(e: ureq::Error) -> ChatError {
    match e {
        ureq::Error::Timeout(_) => ChatError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => ChatError::Timeout,
        other => ChatError::Transport(other.to_string()),
    }
}

/// Returns queued replies in order; useful for tests and replays.
#[derive(Clone, Debug, Default)]
pub struct ScriptedChatClient {
    replies: VecDeque<Result<String, ChatError>>,
    pub requests: Vec<ChatRequest>,
}

impl ScriptedChatClient {
    pub fn new(replies: impl IntoIterator<Item = Result<String, ChatError>>) -> Self {
        Self {
            replies: replies.into_iter().collect(),
            requests: Vec::new(),
        }
    }

    pub fn push(&mut self, reply: Result<String, ChatError>) {
        self.replies.push_back(reply);
    }

    pub fn remaining(&self) -> usize {
        self.replies.len()
    }
}

impl ChatClient for ScriptedChatClient {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, ChatError> {
        self.requests.push(request.clone());
        self.replies
            .pop_front()
            .unwrap_or_else(|| Err(ChatError::Transport("no scripted reply left".into())))
    }
}
