use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FfmEntry, FfmError, FfmRow};
use crate::ingest::InteractionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Categorical,
    Numeric,
}

/// Value transform for numeric fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    None,
    /// `log10(1 + max(v, 0))`, for heavy-tailed price columns.
    Log10,
}

impl Transform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Self::None => v,
            Self::Log10 => (1.0 + v.max(0.0)).log10(),
        }
    }
}

/// One declared field. `user`, `asset_key` and `collection_slug` read the
/// record's identity members; every other name reads the feature maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default)]
    pub transform: Transform,
}

impl FieldDecl {
    pub fn categorical(name: &str) -> Self {
        Self { name: name.into(), kind: FieldKind::Categorical, transform: Transform::None }
    }

    pub fn numeric(name: &str, transform: Transform) -> Self {
        Self { name: name.into(), kind: FieldKind::Numeric, transform }
    }
}

/// Field list used when no spec file is given.
pub fn default_field_spec() -> Vec<FieldDecl> {
    vec![
        FieldDecl::categorical("user"),
        FieldDecl::categorical("asset_key"),
        FieldDecl::categorical("collection_slug"),
        FieldDecl::categorical("payment_token"),
        FieldDecl::numeric("absolute_price_usd", Transform::Log10),
        FieldDecl::numeric("num_sales", Transform::None),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabField {
    pub name: String,
    pub kind: FieldKind,
    pub transform: Transform,
    /// Feature id of a numeric field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_id: Option<u32>,
    /// Category value to feature id, for categorical fields.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub categories: BTreeMap<String, u32>,
}

/// Field and feature dictionaries. Feature ids are dense in `1..=n_features`;
/// id 0 is reserved for values never seen while building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub fields: Vec<VocabField>,
    pub n_features: u32,
}

impl Vocabulary {
    pub const OOV: u32 = 0;

    /// Assigns ids field by field in declaration order. A numeric field takes
    /// one id; a categorical field takes ids for its values in first-occurrence
    /// order over `records`.
    pub fn build(records: &[InteractionRecord], spec: &[FieldDecl]) -> Result<Self, FfmError> {
        if spec.is_empty() {
            return Err(FfmError::Vocabulary("field spec is empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = spec.iter().find(|d| !seen.insert(d.name.as_str())) {
            return Err(FfmError::Vocabulary(format!("duplicate field {:?}", dup.name)));
        }
        let mut next = 1u32;
        let mut fields = Vec::with_capacity(spec.len());
        for decl in spec {
            let mut field = VocabField {
                name: decl.name.clone(),
                kind: decl.kind,
                transform: decl.transform,
                numeric_id: None,
                categories: BTreeMap::new(),
            };
            let mut present = false;
            match decl.kind {
                FieldKind::Numeric => {
                    field.numeric_id = Some(next);
                    next += 1;
                    present = records.iter().any(|r| r.numeric(&decl.name).is_some());
                }
                FieldKind::Categorical => {
                    for r in records {
                        if let Some(v) = r.categorical(&decl.name) {
                            present = true;
                            if !field.categories.contains_key(v) {
                                field.categories.insert(v.to_string(), next);
                                next += 1;
                            }
                        }
                    }
                }
            }
            if !present && !records.is_empty() {
                log::warn!("field {:?} is empty in every record", decl.name);
            }
            fields.push(field);
        }
        Ok(Self { fields, n_features: next - 1 })
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Feature id of a categorical value, `OOV` if unseen.
    pub fn feature_id(&self, field: usize, value: &str) -> u32 {
        self.fields[field].categories.get(value).copied().unwrap_or(Self::OOV)
    }

    /// Encodes a record. Empty fields are omitted; unseen categories map to id 0.
    pub fn encode(&self, record: &InteractionRecord) -> FfmRow {
        let mut entries = Vec::with_capacity(self.fields.len());
        for (i, f) in self.fields.iter().enumerate() {
            let entry = match f.kind {
                FieldKind::Categorical => record.categorical(&f.name).map(|v| (self.feature_id(i, v), 1.0)),
                FieldKind::Numeric => record.numeric(&f.name).map(|v| {
                    (f.numeric_id.expect("numeric field carries an id"), f.transform.apply(v))
                }),
            };
            if let Some((feature, value)) = entry {
                entries.push(FfmEntry { field: i as u32, feature, value });
            }
        }
        FfmRow { label: record.label, entries }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FfmError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| FfmError::Vocabulary(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FfmError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| FfmError::Vocabulary(e.to_string()))
    }
}

pub fn build_vocabulary(records: &[InteractionRecord], spec: &[FieldDecl]) -> Result<Vocabulary, FfmError> {
    Vocabulary::build(records, spec)
}

pub fn encode_record(record: &InteractionRecord, vocab: &Vocabulary) -> FfmRow {
    vocab.encode(record)
}
