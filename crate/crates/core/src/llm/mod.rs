//! Model access: prompts, transport, validation loop and replay.

pub mod client;
pub mod fake;
pub mod gateway;
pub mod prompts;

pub use client::{ChatClient, ChatError, ChatMessage, ChatRequest, HttpChatClient, ScriptedChatClient};
pub use fake::{FakeChatServer, FakeReply};
pub use gateway::{
    decide_with_validation, read_transcripts, Attempt, AttemptStage, ChatExchange, GatewaySettings, LlmPolicy,
    ReplayChatClient, TranscriptEntry,
};
pub use prompts::{numeric_literals, PromptAssets, PromptContext, PromptError};
