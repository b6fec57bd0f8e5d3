//! Execution limits applied to every sandboxed query.

use crate::error::{Error, Result};

/// Row retention and wall-clock caps for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecLimits {
    /// How many result rows are retained for display.
    pub max_rows: usize,
    /// Wall-clock budget in seconds before the query is interrupted.
    pub timeout_secs: f64,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            max_rows: 5,
            timeout_secs: 120.0,
        }
    }
}

impl ExecLimits {
    pub fn new(max_rows: usize, timeout_secs: f64) -> Result<Self> {
        if !timeout_secs.is_finite() || timeout_secs <= 0.0 {
            return Err(Error::Config(format!(
                "timeout must be a positive number of seconds, got {timeout_secs}"
            )));
        }
        Ok(ExecLimits {
            max_rows,
            timeout_secs,
        })
    }

    /// Same timeout, but every result row is retained. Used when a final
    /// answer is compared in full rather than previewed.
    pub fn unbounded_rows(&self) -> Self {
        ExecLimits {
            max_rows: usize::MAX,
            timeout_secs: self.timeout_secs,
        }
    }
}
