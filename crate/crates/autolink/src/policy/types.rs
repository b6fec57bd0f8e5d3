//! Request and usage types shared by every policy backend.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl Sampling {
    /// Temperature 0 keeps multi-turn linking reproducible.
    pub fn deterministic() -> Self {
        Sampling {
            temperature: 0.0,
            seed: None,
        }
    }

    pub fn stochastic(temperature: f64, seed: Option<u64>) -> Self {
        Sampling { temperature, seed }
    }
}

/// One completion request: an ordered chat history plus sampling knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRequest {
    pub messages: Vec<ChatMessage>,
    pub sampling: Sampling,
}

impl PolicyRequest {
    pub fn new(messages: Vec<ChatMessage>, sampling: Sampling) -> Result<Self> {
        if messages.is_empty() {
            return Err(Error::Policy("policy request has no messages".into()));
        }
        Ok(PolicyRequest { messages, sampling })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenSource {
    ProviderReported,
    Approximated,
}

/// Per-call token counts, labeled with how they were obtained so reports
/// never mix measured and estimated numbers silently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub source: TokenSource,
}

impl TokenUsage {
    pub fn approximated(request: &PolicyRequest, response: &str) -> Self {
        TokenUsage {
            input_tokens: approximate_request_tokens(&request.messages),
            output_tokens: approximate_tokens(response),
            source: TokenSource::Approximated,
        }
    }
}

/// A completion backend. One policy value serves one session at a time;
/// backends that talk to shared services handle their own coordination.
pub trait Policy: Send {
    fn complete(&mut self, request: &PolicyRequest) -> Result<(String, TokenUsage)>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn complete(&mut self, request: &PolicyRequest) -> Result<(String, TokenUsage)> {
        (**self).complete(request)
    }
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn complete(&mut self, request: &PolicyRequest) -> Result<(String, TokenUsage)> {
        (**self).complete(request)
    }
}

/// Character-count estimate for backends that report no usage: one token
/// per four characters, rounded up.
pub fn approximate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub fn approximate_request_tokens(messages: &[ChatMessage]) -> u64 {
    messages
        .iter()
        .map(|message| approximate_tokens(&message.content))
        .sum()
}
