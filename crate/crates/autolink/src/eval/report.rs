//! Run reports: per-case rows, recomputable aggregates, and emission.

use serde::{Deserialize, Serialize};

use crate::agent::StopReason;
use crate::error::{Error, Result};
use crate::sqlgen::ExOutcome;

pub const REPORT_VERSION: u32 = 1;

/// Everything measured for one benchmark case. Rows with an `error`
/// still carry whatever was measured before the failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub case_id: String,
    pub db_id: String,
    /// Infrastructure failure for this case, if any.
    pub error: Option<String>,
    pub linked_columns: usize,
    pub srr_hit: bool,
    pub turns_used: usize,
    pub stop_reason: Option<StopReason>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// provider_reported, approximated, or mixed.
    pub token_source: String,
    pub selected_sql: Option<String>,
    pub ex_outcome: Option<ExOutcome>,
}

impl CaseRow {
    /// A row that failed before any measurement.
    pub fn failed(case_id: &str, db_id: &str, error: impl Into<String>) -> Self {
        CaseRow {
            case_id: case_id.to_string(),
            db_id: db_id.to_string(),
            error: Some(error.into()),
            linked_columns: 0,
            srr_hit: false,
            turns_used: 0,
            stop_reason: None,
            input_tokens: 0,
            output_tokens: 0,
            token_source: "approximated".to_string(),
            selected_sql: None,
            ex_outcome: None,
        }
    }
}

/// Headline metrics recomputable from the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub cases: usize,
    /// Fraction of cases whose linked schema covers all gold columns.
    pub srr: f64,
    /// Mean linked-schema size.
    pub mean_linked_columns: f64,
    pub mean_input_tokens: f64,
    pub mean_output_tokens: f64,
    /// Fraction of scored cases whose prediction matched gold; absent
    /// when no case was scored.
    pub ex: Option<f64>,
    /// Number of cases with an execution-accuracy outcome.
    pub ex_cases: usize,
}

/// One benchmark run, self-verifying: the stored aggregates must equal
/// a recomputation from the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: u32,
    pub seed: u64,
    /// Names of actions disabled for this run.
    pub ablation: Vec<String>,
    pub rows: Vec<CaseRow>,
    pub aggregates: Aggregates,
}

impl RunReport {
    pub fn new(seed: u64, ablation: Vec<String>, rows: Vec<CaseRow>) -> Self {
        let aggregates = compute_aggregates(&rows);
        RunReport {
            report_version: REPORT_VERSION,
            seed,
            ablation,
            rows,
            aggregates,
        }
    }

    /// Recomputes the aggregates and demands exact equality.
    pub fn verify(&self) -> Result<()> {
        if self.report_version != REPORT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported report_version {}",
                self.report_version
            )));
        }
        let recomputed = compute_aggregates(&self.rows);
        if recomputed != self.aggregates {
            return Err(Error::Validation(
                "report aggregates do not match their rows".into(),
            ));
        }
        Ok(())
    }
}

/// The single source of truth for aggregate math, used both when a
/// report is built and when it is verified.
pub fn compute_aggregates(rows: &[CaseRow]) -> Aggregates {
    let cases = rows.len();
    if cases == 0 {
        return Aggregates {
            cases: 0,
            srr: 0.0,
            mean_linked_columns: 0.0,
            mean_input_tokens: 0.0,
            mean_output_tokens: 0.0,
            ex: None,
            ex_cases: 0,
        };
    }
    let denominator = cases as f64;
    let hits = rows.iter().filter(|row| row.srr_hit).count();
    let linked_total: usize = rows.iter().map(|row| row.linked_columns).sum();
    let input_total: u64 = rows.iter().map(|row| row.input_tokens).sum();
    let output_total: u64 = rows.iter().map(|row| row.output_tokens).sum();
    let ex_cases = rows.iter().filter(|row| row.ex_outcome.is_some()).count();
    let ex_matches = rows
        .iter()
        .filter(|row| row.ex_outcome == Some(ExOutcome::Match))
        .count();
    Aggregates {
        cases,
        srr: hits as f64 / denominator,
        mean_linked_columns: linked_total as f64 / denominator,
        mean_input_tokens: input_total as f64 / denominator,
        mean_output_tokens: output_total as f64 / denominator,
        ex: (ex_cases > 0).then(|| ex_matches as f64 / ex_cases as f64),
        ex_cases,
    }
}

/// Machine emission: pretty JSON with a trailing newline.
pub fn emit_json(report: &RunReport) -> Result<String> {
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|error| Error::Validation(format!("report serialization: {error}")))?;
    json.push('\n');
    Ok(json)
}

/// Human emission: an aligned per-case table followed by the headline
/// metrics.
pub fn emit_text(report: &RunReport) -> String {
    let header = [
        "case", "db", "linked", "srr", "turns", "tok_in", "tok_out", "ex", "error",
    ];
    let mut grid: Vec<Vec<String>> = vec![header.iter().map(|cell| cell.to_string()).collect()];
    for row in &report.rows {
        let ex_text = match row.ex_outcome {
            Some(ExOutcome::Match) => "match",
            Some(ExOutcome::Mismatch) => "mismatch",
            Some(ExOutcome::PredError) => "pred_error",
            None => "-",
        };
        grid.push(vec![
            row.case_id.clone(),
            row.db_id.clone(),
            row.linked_columns.to_string(),
            if row.srr_hit { "yes" } else { "no" }.to_string(),
            row.turns_used.to_string(),
            row.input_tokens.to_string(),
            row.output_tokens.to_string(),
            ex_text.to_string(),
            row.error.clone().unwrap_or_default(),
        ]);
    }

    let columns = header.len();
    let mut widths = vec![0usize; columns];
    for row in &grid {
        for (index, cell) in row.iter().enumerate() {
            widths[index] = widths[index].max(cell.chars().count());
        }
    }

    let mut out = String::new();
    for row in &grid {
        let mut line = String::new();
        for (index, cell) in row.iter().enumerate() {
            line.push_str(cell);
            if index + 1 < columns {
                let pad = widths[index] - cell.chars().count();
                line.extend(std::iter::repeat_n(' ', pad + 2));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }

    let aggregates = &report.aggregates;
    out.push('\n');
    out.push_str(&format!("Cases: {}\n", aggregates.cases));
    out.push_str(&format!("SRR: {:.4}\n", aggregates.srr));
    out.push_str(&format!("C̄: {:.4}\n", aggregates.mean_linked_columns));
    out.push_str(&format!(
        "Avg. Tokens: {:.1} in / {:.1} out\n",
        aggregates.mean_input_tokens, aggregates.mean_output_tokens
    ));
    match aggregates.ex {
        Some(ex) => out.push_str(&format!(
            "EX: {:.4} ({} of {} cases scored)\n",
            ex, aggregates.ex_cases, aggregates.cases
        )),
        None => out.push_str("EX: not scored\n"),
    }
    if !report.ablation.is_empty() {
        out.push_str(&format!("Ablation: {}\n", report.ablation.join(", ")));
    }
    out
}
