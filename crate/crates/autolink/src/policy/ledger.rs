//! Accumulating token ledger for a pipeline run.

use crate::policy::types::{TokenSource, TokenUsage};

/// Records every policy call's usage so report totals can be verified
/// against the per-call entries exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenLedger {
    entries: Vec<TokenUsage>,
}

impl TokenLedger {
    pub fn new() -> Self {
        TokenLedger::default()
    }

    pub fn record(&mut self, usage: TokenUsage) {
        self.entries.push(usage);
    }

    /// Absorbs usages already collected elsewhere, e.g. a transcript.
    pub fn extend(&mut self, usages: impl IntoIterator<Item = TokenUsage>) {
        self.entries.extend(usages);
    }

    pub fn entries(&self) -> &[TokenUsage] {
        &self.entries
    }

    /// Exact (input, output) sums over all entries.
    pub fn totals(&self) -> (u64, u64) {
        self.entries.iter().fold((0, 0), |(input, output), usage| {
            (input + usage.input_tokens, output + usage.output_tokens)
        })
    }

    /// How the counts were obtained: uniform sources keep their label,
    /// anything else is reported as mixed.
    pub fn source_label(&self) -> &'static str {
        let mut provider = false;
        let mut approximated = false;
        for usage in &self.entries {
            match usage.source {
                TokenSource::ProviderReported => provider = true,
                TokenSource::Approximated => approximated = true,
            }
        }
        match (provider, approximated) {
            (true, false) => "provider_reported",
            (false, true) => "approximated",
            (true, true) => "mixed",
            (false, false) => "approximated",
        }
    }
}
