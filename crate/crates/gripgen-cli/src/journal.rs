//! Append-only JSONL trial journal.
//!
//! One JSON object per line. The `timestamp` field is always written as
//! 0.0: journals are part of the byte-identical reproducibility contract,
//! so no wall-clock data may enter them.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use gripgen::space::{DesignPoint, TrialRecord};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JournalLine {
    /// 0-based trial index.
    pub trial: usize,
    pub point: DesignPoint,
    pub score: f64,
    /// Per-trial evaluation seed (derived from the master seed).
    pub seed: u64,
    /// Always 0.0; see module docs.
    pub timestamp: f64,
    #[serde(default)]
    pub tag: String,
}

impl JournalLine {
    pub fn to_record(&self) -> TrialRecord {
        TrialRecord {
            point: self.point.clone(),
            score: self.score,
            seed: self.seed,
            wall_time: 0.0,
            tag: self.tag.clone(),
        }
    }
}

pub fn read_journal(path: &Path) -> CliResult<Vec<JournalLine>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JournalLine = serde_json::from_str(line).map_err(|e| {
            CliError::Invariant(format!("corrupt journal {} line {}: {e}", path.display(), i + 1))
        })?;
        if parsed.trial != out.len() {
            return Err(CliError::Invariant(format!(
                "journal {} line {}: trial index {} out of order",
                path.display(),
                i + 1,
                parsed.trial
            )));
        }
        out.push(parsed);
    }
    Ok(out)
}

/// Appends a block of lines with a single write so an interrupted run
/// never leaves a torn batch behind.
pub fn append_lines(path: &Path, lines: &[JournalLine]) -> CliResult<()> {
    let mut buf = String::new();
    for line in lines {
        buf.push_str(
            &serde_json::to_string(line).map_err(|e| CliError::Internal(e.to_string()))?,
        );
        buf.push('\n');
    }
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(buf.as_bytes())?;
    file.flush()?;
    Ok(())
}
