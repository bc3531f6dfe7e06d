//! JSONL streaming with per-line error reporting.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::Error;
use crate::trajectory::TrajectoryRecord;

/// What to do with a line that fails to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MalformedLine {
    /// Skip the line, recording its number.
    Skip,
    /// Abort on the first malformed line.
    Abort,
}

/// Result of reading a JSONL stream: parsed records plus the 1-based line
/// numbers (and messages) of any lines that were skipped.
#[derive(Debug)]
pub struct JsonlBatch {
    pub records: Vec<TrajectoryRecord>,
    pub skipped: Vec<(usize, String)>,
}

/// Reads trajectory records from a JSONL reader. Blank lines are ignored.
/// In [`MalformedLine::Abort`] mode the error message carries the 1-based
/// line number of the offending line.
pub fn read_jsonl<R: Read>(reader: R, on_malformed: MalformedLine) -> Result<JsonlBatch, Error> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match TrajectoryRecord::from_json_line(&line) {
            Ok(rec) => records.push(rec),
            Err(e) => match on_malformed {
                MalformedLine::Skip => skipped.push((line_no, e.to_string())),
                MalformedLine::Abort => {
                    return Err(Error::MalformedLine { line: line_no, message: e.to_string() })
                }
            },
        }
    }
    Ok(JsonlBatch { records, skipped })
}

/// [`read_jsonl`] over a file path.
pub fn read_jsonl_file(path: &Path, on_malformed: MalformedLine) -> Result<JsonlBatch, Error> {
    read_jsonl(std::fs::File::open(path)?, on_malformed)
}

/// Serializes records to JSONL, one object per line, input order preserved.
pub fn to_jsonl(records: &[TrajectoryRecord]) -> Result<String, Error> {
    let mut out = String::new();
    for rec in records {
        out.push_str(&rec.to_json_line()?);
        out.push('\n');
    }
    Ok(out)
}
