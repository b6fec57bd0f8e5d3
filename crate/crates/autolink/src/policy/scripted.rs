//! Deterministic queue-backed policy for tests and fixtures.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::policy::types::{Policy, PolicyRequest, TokenUsage};

/// Returns pre-written outputs in order, with approximated usage.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    queue: VecDeque<String>,
}

impl ScriptedPolicy {
    pub fn new<I, S>(outputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedPolicy {
            queue: outputs.into_iter().map(Into::into).collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl Policy for ScriptedPolicy {
    fn complete(&mut self, request: &PolicyRequest) -> Result<(String, TokenUsage)> {
        let text = self.queue.pop_front().ok_or_else(|| {
            Error::Policy("scripted policy ran out of outputs (test-script underrun)".into())
        })?;
        let usage = TokenUsage::approximated(request, &text);
        Ok((text, usage))
    }
}
