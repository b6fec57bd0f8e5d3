//! Recording and replaying raw policy outputs.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::policy::types::{Policy, PolicyRequest, TokenUsage};

/// Wraps another policy and keeps every raw output, so a live run can be
/// replayed later as a deterministic regression fixture.
#[derive(Debug)]
pub struct RecordingPolicy<P> {
    inner: P,
    outputs: Vec<String>,
}

impl<P: Policy> RecordingPolicy<P> {
    pub fn new(inner: P) -> Self {
        RecordingPolicy {
            inner,
            outputs: Vec::new(),
        }
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn into_outputs(self) -> Vec<String> {
        self.outputs
    }
}

impl<P: Policy> Policy for RecordingPolicy<P> {
    fn complete(&mut self, request: &PolicyRequest) -> Result<(String, TokenUsage)> {
        let (text, usage) = self.inner.complete(request)?;
        self.outputs.push(text.clone());
        Ok((text, usage))
    }
}

/// Replays previously recorded outputs in order, erroring on underrun.
#[derive(Debug, Clone)]
pub struct ReplayPolicy {
    outputs: VecDeque<String>,
}

impl ReplayPolicy {
    pub fn new<I, S>(outputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ReplayPolicy {
            outputs: outputs.into_iter().map(Into::into).collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.outputs.len()
    }
}

impl Policy for ReplayPolicy {
    fn complete(&mut self, request: &PolicyRequest) -> Result<(String, TokenUsage)> {
        let text = self.outputs.pop_front().ok_or_else(|| {
            Error::Policy(
                "replay exhausted: the session asked for more completions than were recorded"
                    .into(),
            )
        })?;
        let usage = TokenUsage::approximated(request, &text);
        Ok((text, usage))
    }
}
