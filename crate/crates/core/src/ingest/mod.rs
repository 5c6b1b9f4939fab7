//! Event parsing, cleaning, negative sampling, grouping and splitting.

mod clean;
mod event;
mod group;
mod negatives;
mod split;
mod synth;

pub use clean::{
    clean, compute_empty_rate, CleanOutput, CleaningConfig, InteractionRecord, KEY_COLUMNS,
};
pub use event::{
    canonical_role, parse_events, parse_timestamp, serialize_events, ColumnRole, EventType,
    ParsedEvents, RawEvent, SkippedRecord, CANONICAL_COLUMNS,
};
pub use group::{group_records, Grouping};
pub use negatives::{sample_negatives, NegativeSample};
pub use split::{split_dataset, DatasetBundle, SplitFractions};
pub use synth::{generate_synthetic, SynthSpec};

use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed JSON at line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("empty event sequence")]
    NoEvents,
    #[error("invalid cleaning config: {0}")]
    Config(String),
    #[error("invalid split fractions: {0}")]
    Split(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes records as line-delimited JSON.
pub fn write_records<W: Write>(mut w: W, records: &[InteractionRecord]) -> Result<(), IngestError> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads line-delimited JSON records. Blank lines are ignored.
pub fn read_records<R: BufRead>(r: R) -> Result<Vec<InteractionRecord>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| IngestError::Json {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
