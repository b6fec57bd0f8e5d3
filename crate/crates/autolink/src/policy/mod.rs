//! Pluggable completion backends and token accounting.

mod ledger;
mod record;
mod remote;
mod scripted;
mod types;

pub use ledger::TokenLedger;
pub use record::{RecordingPolicy, ReplayPolicy};
pub use remote::{RemotePolicy, RemotePolicyConfig};
pub use scripted::ScriptedPolicy;
pub use types::{
    approximate_request_tokens, approximate_tokens, ChatMessage, ChatRole, Policy, PolicyRequest,
    Sampling, TokenSource, TokenUsage,
};
