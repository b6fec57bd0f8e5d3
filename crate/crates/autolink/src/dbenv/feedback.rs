//! Structured query feedback and its exact text rendering.

use serde::{Deserialize, Serialize};

/// Classification of one executed query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    /// Ran to completion and produced at least one row.
    Rows,
    /// Ran to completion and produced no rows.
    Empty,
    /// Interrupted after exceeding the wall-clock budget.
    Timeout,
    /// Rejected by the engine or by the sandbox.
    EngineError,
}

/// Everything needed to render the textual observation for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlFeedback {
    pub kind: FeedbackKind,
    /// Full result cardinality, which may exceed the retained rows.
    pub total_rows: u64,
    pub elapsed_secs: f64,
    pub header: Vec<String>,
    /// Display-ready cells for the retained rows.
    pub rows: Vec<Vec<String>>,
    /// Error text for `Timeout` and `EngineError` feedback.
    pub message: String,
}

impl SqlFeedback {
    pub fn rows(
        header: Vec<String>,
        rows: Vec<Vec<String>>,
        total_rows: u64,
        elapsed_secs: f64,
    ) -> Self {
        SqlFeedback {
            kind: FeedbackKind::Rows,
            total_rows,
            elapsed_secs,
            header,
            rows,
            message: String::new(),
        }
    }

    pub fn empty(elapsed_secs: f64) -> Self {
        SqlFeedback {
            kind: FeedbackKind::Empty,
            total_rows: 0,
            elapsed_secs,
            header: Vec::new(),
            rows: Vec::new(),
            message: String::new(),
        }
    }

    pub fn timeout(limit_secs: f64) -> Self {
        SqlFeedback {
            kind: FeedbackKind::Timeout,
            total_rows: 0,
            elapsed_secs: limit_secs,
            header: Vec::new(),
            rows: Vec::new(),
            message: format!("SQL execution timed out after {limit_secs} seconds"),
        }
    }

    pub fn engine_error(message: impl Into<String>) -> Self {
        SqlFeedback {
            kind: FeedbackKind::EngineError,
            total_rows: 0,
            elapsed_secs: 0.0,
            header: Vec::new(),
            rows: Vec::new(),
            message: message.into(),
        }
    }
}

/// Renders feedback in the fixed observation format the agent is trained
/// to read. Every byte matters here, including the historical spelling
/// "bellow" in the success header.
pub fn render_feedback(feedback: &SqlFeedback) -> String {
    match feedback.kind {
        FeedbackKind::Rows => render_rows(feedback),
        FeedbackKind::Empty => format!(
            "[No data found for the specified query, Execution time: {:.2}s]",
            feedback.elapsed_secs
        ),
        FeedbackKind::Timeout | FeedbackKind::EngineError => {
            format!("[ERROR: {}]", feedback.message)
        }
    }
}

fn render_rows(feedback: &SqlFeedback) -> String {
    let shown = feedback.rows.len();
    let mut out = format!(
        "[Total rows: {}, Execution time: {:.2}s, Top-{} rows are shown bellow]",
        feedback.total_rows, feedback.elapsed_secs, shown
    );

    let widths = column_widths(&feedback.header, &feedback.rows);
    let header_line = render_line(&feedback.header, &widths);
    out.push('\n');
    out.push_str(&header_line);
    out.push('\n');
    out.push_str(&dash_rule(&header_line));
    for row in &feedback.rows {
        out.push('\n');
        out.push_str(&render_line(row, &widths));
    }

    let truncated = feedback.total_rows.saturating_sub(shown as u64);
    if truncated > 0 {
        out.push('\n');
        out.push_str(&format!("{truncated} rows truncated ..."));
    }
    out
}

/// Each column is as wide as its widest cell, header included.
fn column_widths(header: &[String], rows: &[Vec<String>]) -> Vec<usize> {
    let mut widths: Vec<usize> = header.iter().map(|cell| cell.chars().count()).collect();
    for row in rows {
        for (index, cell) in row.iter().enumerate() {
            if index >= widths.len() {
                widths.push(0);
            }
            widths[index] = widths[index].max(cell.chars().count());
        }
    }
    widths
}

fn render_line(cells: &[String], widths: &[usize]) -> String {
    let mut parts = Vec::with_capacity(cells.len());
    for (index, cell) in cells.iter().enumerate() {
        if index + 1 == cells.len() {
            parts.push(cell.clone());
        } else {
            let width = widths.get(index).copied().unwrap_or(0);
            let padding = width.saturating_sub(cell.chars().count());
            parts.push(format!("{cell}{}", " ".repeat(padding)));
        }
    }
    parts.join(" | ")
}

/// The separator line mirrors the header line, dash for dash, keeping
/// only the pipe positions.
fn dash_rule(header_line: &str) -> String {
    header_line
        .chars()
        .map(|ch| if ch == '|' { '|' } else { '-' })
        .collect()
}
