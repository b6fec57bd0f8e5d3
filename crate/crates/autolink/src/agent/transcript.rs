//! Transcript persistence: one JSON turn record per line.

use std::fs;
use std::path::Path;

use crate::agent::session::TranscriptRecord;
use crate::error::{Error, Result};

/// Writes a transcript as JSON Lines, one turn per line.
pub fn write_transcript(path: &Path, records: &[TranscriptRecord]) -> Result<()> {
    let mut out = String::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|error| Error::Validation(format!("transcript serialization: {error}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out).map_err(|error| Error::io(path, error))
}

/// Reads a transcript written by [`write_transcript`], reporting the
/// offending line number on parse failures.
pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>> {
    let text = fs::read_to_string(path).map_err(|error| Error::io(path, error))?;
    let mut records = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TranscriptRecord = serde_json::from_str(line)
            .map_err(|error| Error::parse(path, index + 1, error.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

/// Extracts the raw policy outputs in turn order, ready to feed a replay
/// policy that re-runs the session without a live backend.
pub fn raw_outputs(records: &[TranscriptRecord]) -> Vec<String> {
    records.iter().map(|record| record.raw_output.clone()).collect()
}
