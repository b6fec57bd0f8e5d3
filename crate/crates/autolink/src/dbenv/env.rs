//! Orchestration from raw SQL to classified, renderable feedback.

use crate::dbenv::feedback::SqlFeedback;
use crate::dbenv::limits::ExecLimits;
use crate::dbenv::sandbox::screen_statement;
use crate::dbenv::sqlite::{DialectAdapter, RawExecution};
use crate::error::{Error, Result};

/// Screens the statement and runs it through the adapter, keeping the
/// typed rows. Callers that only need text should use [`execute`].
pub fn execute_raw(
    adapter: &mut dyn DialectAdapter,
    sql: &str,
    limits: &ExecLimits,
) -> RawExecution {
    if sql.trim().is_empty() {
        return RawExecution::EngineError {
            message: "empty SQL statement".to_string(),
            elapsed_secs: 0.0,
        };
    }
    if let Err(message) = screen_statement(sql) {
        return RawExecution::EngineError {
            message,
            elapsed_secs: 0.0,
        };
    }
    adapter.execute_raw(sql, limits.timeout_secs, limits.max_rows)
}

/// Runs one statement and classifies the outcome into feedback.
pub fn execute(adapter: &mut dyn DialectAdapter, sql: &str, limits: &ExecLimits) -> SqlFeedback {
    match execute_raw(adapter, sql, limits) {
        RawExecution::Rows {
            total_rows: 0,
            elapsed_secs,
            ..
        } => SqlFeedback::empty(elapsed_secs),
        RawExecution::Rows {
            header,
            rows,
            total_rows,
            elapsed_secs,
        } => {
            let display_rows = rows
                .iter()
                .map(|row| row.iter().map(|cell| cell.display_text()).collect())
                .collect();
            SqlFeedback::rows(header, display_rows, total_rows, elapsed_secs)
        }
        RawExecution::Interrupted { .. } => SqlFeedback::timeout(limits.timeout_secs),
        RawExecution::EngineError { message, .. } => SqlFeedback::engine_error(message),
    }
}

/// Metadata idioms the bound engine understands, for prompt assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataSupport {
    pub dialect_id: &'static str,
    /// Query that lists the tables of the current database.
    pub table_listing: &'static str,
    /// Command template that lists the columns of one table.
    pub column_listing: &'static str,
}

pub fn metadata_support(dialect_id: &str) -> Result<MetadataSupport> {
    match dialect_id {
        "sqlite" => Ok(MetadataSupport {
            dialect_id: "sqlite",
            table_listing: "SELECT name FROM sqlite_master WHERE type='table'",
            column_listing: "PRAGMA table_info(<table>);",
        }),
        other => Err(Error::Config(format!("unknown dialect adapter: {other}"))),
    }
}
