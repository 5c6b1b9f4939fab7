//! Field/feature vocabularies and the libffm text format.
//!
//! A row renders as `<label> <field_id>:<feature_id>:<value>...`, entries
//! sorted by field id, values in shortest round-trip decimal form.

mod codec;
mod vocab;

pub use codec::{read_dataset, read_rows, write_dataset, write_rows, FfmEntry, FfmRow};
pub use vocab::{
    build_vocabulary, default_field_spec, encode_record, FieldDecl, FieldKind, Transform,
    VocabField, Vocabulary,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FfmError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("duplicate field {field} at byte {offset}")]
    DuplicateField { offset: usize, field: u32 },
    #[error("line {line}: {error}")]
    Line {
        line: usize,
        error: Box<FfmError>,
    },
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
