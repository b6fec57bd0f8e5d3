//! HTTP chat-completion backend with retries and an in-flight cap.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::types::{ChatMessage, Policy, PolicyRequest, TokenSource, TokenUsage};

const BACKOFF_BASE_MS: u64 = 250;

/// Connection settings for a chat-completion service. As with the
/// embedder, only the environment-variable name of the API key is
/// configured, never the key itself.
#[derive(Debug, Clone)]
pub struct RemotePolicyConfig {
    /// Service root; the client posts to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub timeout_secs: f64,
    /// Additional attempts after the first, for transient failures only.
    pub max_retries: u32,
    /// Cap on concurrent requests across all clones of this policy.
    pub max_in_flight: usize,
}

/// Remote policy backend. Clones share one in-flight gate, so a fleet of
/// parallel sessions can each own a clone while respecting one cap.
#[derive(Clone)]
pub struct RemotePolicy {
    config: RemotePolicyConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    gate: Arc<Gate>,
}

impl std::fmt::Debug for RemotePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemotePolicy")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish_non_exhaustive()
    }
}

impl RemotePolicy {
    pub fn new(config: RemotePolicyConfig) -> Result<Self> {
        if config.max_in_flight == 0 {
            return Err(Error::Config(
                "policy in-flight cap must be positive".into(),
            ));
        }
        let api_key = match &config.api_key_env {
            Some(name) => Some(std::env::var(name).map_err(|_| {
                Error::Config(format!("environment variable {name} is not set"))
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .build()
            .into();
        let gate = Arc::new(Gate::new(config.max_in_flight));
        Ok(RemotePolicy {
            config,
            api_key,
            agent,
            gate,
        })
    }

    fn send(&self, request: &PolicyRequest) -> std::result::Result<(String, TokenUsage), Attempt> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let wire = ChatRequest {
            model: &self.config.model,
            messages: &request.messages,
            temperature: request.sampling.temperature,
            seed: request.sampling.seed,
        };
        let mut http = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            http = http.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = match http.send_json(&wire) {
            Ok(response) => response,
            Err(ureq::Error::StatusCode(code)) if code == 401 || code == 403 => {
                return Err(Attempt::Fatal(Error::Config(format!(
                    "completion service rejected the credentials (status {code})"
                ))));
            }
            Err(ureq::Error::StatusCode(code)) if code == 429 || code >= 500 => {
                return Err(Attempt::Transient(format!("status {code}")));
            }
            Err(ureq::Error::StatusCode(code)) => {
                return Err(Attempt::Fatal(Error::Policy(format!(
                    "completion request failed with status {code}"
                ))));
            }
            Err(error) => return Err(Attempt::Transient(error.to_string())),
        };

        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|error| Attempt::Transient(format!("response is not valid JSON: {error}")))?;
        let Some(choice) = parsed.choices.into_iter().next() else {
            return Err(Attempt::Fatal(Error::Policy(
                "completion response has no choices".into(),
            )));
        };
        let text = choice.message.content;
        let usage = match parsed.usage {
            Some(usage) => TokenUsage {
                input_tokens: usage.prompt_tokens,
                output_tokens: usage.completion_tokens,
                source: TokenSource::ProviderReported,
            },
            None => TokenUsage::approximated(request, &text),
        };
        Ok((text, usage))
    }
}

impl Policy for RemotePolicy {
    fn complete(&mut self, request: &PolicyRequest) -> Result<(String, TokenUsage)> {
        let _permit = self.gate.acquire();
        let mut last_failure = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(BACKOFF_BASE_MS << (attempt - 1)));
            }
            match self.send(request) {
                Ok(outcome) => return Ok(outcome),
                Err(Attempt::Fatal(error)) => return Err(error),
                Err(Attempt::Transient(message)) => last_failure = message,
            }
        }
        Err(Error::Policy(format!(
            "completion failed after {} attempts: {last_failure}",
            self.config.max_retries + 1
        )))
    }
}

enum Attempt {
    Fatal(Error),
    Transient(String),
}

#[derive(Debug)]
struct Gate {
    in_flight: Mutex<usize>,
    released: Condvar,
    cap: usize,
}

impl Gate {
    fn new(cap: usize) -> Self {
        Gate {
            in_flight: Mutex::new(0),
            released: Condvar::new(),
            cap,
        }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut count = self.in_flight.lock().unwrap();
        while *count >= self.cap {
            count = self.released.wait(count).unwrap();
        }
        *count += 1;
        GatePermit { gate: self }
    }
}

struct GatePermit<'a> {
    gate: &'a Gate,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        let mut count = self.gate.in_flight.lock().unwrap();
        *count -= 1;
        self.gate.released.notify_one();
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}
