//! Execution accuracy: order-insensitive result comparison.

use serde::{Deserialize, Serialize};

use crate::dbenv::{execute_raw, DialectAdapter, ExecLimits, RawExecution};
use crate::error::{Error, Result};
use crate::sqlgen::grouping::canonical_result;

/// How a predicted statement compares against the gold statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExOutcome {
    Match,
    Mismatch,
    /// The predicted statement failed to execute.
    PredError,
}

/// Executes both statements with the row cap lifted and compares their
/// results as multisets of normalized rows. A failing prediction is an
/// outcome; a failing gold statement is a broken benchmark row and
/// therefore an error.
pub fn execution_accuracy(
    predicted: &str,
    gold: &str,
    adapter: &mut dyn DialectAdapter,
    limits: &ExecLimits,
) -> Result<ExOutcome> {
    let eval_limits = limits.unbounded_rows();
    let gold_canonical = match execute_raw(adapter, gold, &eval_limits) {
        RawExecution::Rows { rows, .. } => canonical_result(&rows),
        RawExecution::Interrupted { .. } => {
            return Err(Error::Validation(
                "gold SQL timed out; the benchmark row is unusable".into(),
            ));
        }
        RawExecution::EngineError { message, .. } => {
            return Err(Error::Validation(format!(
                "gold SQL failed to execute: {message}"
            )));
        }
    };

    let predicted_canonical = match execute_raw(adapter, predicted, &eval_limits) {
        RawExecution::Rows { rows, .. } => canonical_result(&rows),
        RawExecution::Interrupted { .. } | RawExecution::EngineError { .. } => {
            return Ok(ExOutcome::PredError);
        }
    };

    if predicted_canonical == gold_canonical {
        Ok(ExOutcome::Match)
    } else {
        Ok(ExOutcome::Mismatch)
    }
}
