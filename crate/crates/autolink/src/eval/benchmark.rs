//! Benchmark ingestion: one JSON case per line.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluation case: a question, its database, the reference SQL,
/// and the curated set of columns that SQL requires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub case_id: String,
    pub db_id: String,
    pub question: String,
    pub gold_sql: String,
    /// Required (table, column) pairs; serialized as pair arrays.
    pub gold_columns: Vec<(String, String)>,
    /// Adapter id the case runs against.
    pub dialect: String,
}

/// Loads a benchmark file, reporting the offending line number for
/// parse and validation failures.
pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkCase>> {
    let text = fs::read_to_string(path).map_err(|error| Error::io(path, error))?;
    let mut cases = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    for (index, line) in text.lines().enumerate() {
        let line_number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let case: BenchmarkCase = serde_json::from_str(line)
            .map_err(|error| Error::parse(path, line_number, error.to_string()))?;
        if case.case_id.trim().is_empty() {
            return Err(Error::parse(path, line_number, "case_id must not be empty"));
        }
        if case.gold_columns.is_empty() {
            return Err(Error::parse(
                path,
                line_number,
                format!("case {} has no gold_columns", case.case_id),
            ));
        }
        if !seen_ids.insert(case.case_id.clone()) {
            return Err(Error::parse(
                path,
                line_number,
                format!("duplicate case_id {}", case.case_id),
            ));
        }
        cases.push(case);
    }
    Ok(cases)
}
