//! Best-effort extraction of example values for schema rendering.

use crate::dbenv::env::execute_raw;
use crate::dbenv::limits::ExecLimits;
use crate::dbenv::sqlite::{DialectAdapter, RawExecution};
use crate::schema::{column_key, LinkedSchema, SampleMap};

/// Fetches up to `count` distinct non-null values from one column,
/// rendered as display text. Any failure yields an empty list; sample
/// values are decoration, not ground truth.
pub fn sample_column_values(
    adapter: &mut dyn DialectAdapter,
    table: &str,
    column: &str,
    count: usize,
    limits: &ExecLimits,
) -> Vec<String> {
    let table = quote_identifier(table);
    let column = quote_identifier(column);
    let sql = format!(
        "SELECT DISTINCT {column} FROM {table} WHERE {column} IS NOT NULL LIMIT {count}"
    );
    let sampling_limits = ExecLimits {
        max_rows: count,
        timeout_secs: limits.timeout_secs,
    };
    match execute_raw(adapter, &sql, &sampling_limits) {
        RawExecution::Rows { rows, .. } => rows
            .iter()
            .filter_map(|row| row.first())
            .map(|cell| cell.display_text())
            .collect(),
        _ => Vec::new(),
    }
}

/// Samples live values for every linked column, keyed for M-Schema
/// rendering. Columns that cannot be sampled simply stay absent.
pub fn collect_sample_map(
    adapter: &mut dyn DialectAdapter,
    linked: &LinkedSchema,
    count: usize,
    limits: &ExecLimits,
) -> SampleMap {
    let mut samples = SampleMap::new();
    for entry in linked.entries() {
        let values =
            sample_column_values(adapter, &entry.table_name, &entry.column_name, count, limits);
        if !values.is_empty() {
            samples.insert(column_key(&entry.table_name, &entry.column_name), values);
        }
    }
    samples
}

fn quote_identifier(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}
