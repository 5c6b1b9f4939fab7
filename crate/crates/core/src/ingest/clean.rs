use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::event::{ColumnRole, RawEvent, CANONICAL_COLUMNS};
use super::IngestError;

/// Columns that identify an interaction. Pruning any of them is a configuration error.
pub const KEY_COLUMNS: [&str; 3] = ["buyer_address", "asset_id", "collection_slug"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningConfig {
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    pub empty_rate_threshold: f64,
    pub negative_ratio: f64,
    pub rng_seed: u64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            window_start: Utc.with_ymd_and_hms(2022, 4, 12, 15, 0, 0).unwrap(),
            window_end: Utc.with_ymd_and_hms(2022, 4, 17, 21, 0, 0).unwrap(),
            empty_rate_threshold: 0.25,
            negative_ratio: 1.0,
            rng_seed: 0,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.window_start >= self.window_end {
            return Err(IngestError::Config("window_start must precede window_end".into()));
        }
        if !(0.0..=1.0).contains(&self.empty_rate_threshold) {
            return Err(IngestError::Config(format!(
                "empty_rate_threshold {} outside [0, 1]",
                self.empty_rate_threshold
            )));
        }
        if !(self.negative_ratio.is_finite() && self.negative_ratio > 0.0) {
            return Err(IngestError::Config(format!(
                "negative_ratio {} must be positive",
                self.negative_ratio
            )));
        }
        Ok(())
    }
}

/// A labeled (user, asset) interaction with its surviving feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub label: u8,
    pub user: String,
    pub asset_key: String,
    pub collection_slug: String,
    #[serde(default)]
    pub categorical_features: BTreeMap<String, String>,
    #[serde(default)]
    pub numeric_features: BTreeMap<String, f64>,
}

impl InteractionRecord {
    /// Builds a record from an event, keeping only feature columns accepted by `keep`.
    ///
    /// Returns `None` when the buyer, asset id or collection is empty.
    pub fn from_event(ev: &RawEvent, label: u8, keep: impl Fn(&str) -> bool) -> Option<Self> {
        let user = ev.buyer_address.clone()?;
        let asset_key = ev.asset_id.clone()?;
        let collection_slug = ev.collection_slug.clone()?;
        let mut categorical_features = BTreeMap::new();
        let mut numeric_features = BTreeMap::new();
        for (name, role) in CANONICAL_COLUMNS {
            if !keep(name) {
                continue;
            }
            match role {
                ColumnRole::Key => {}
                ColumnRole::Categorical => {
                    if let Some(v) = ev.text(name) {
                        categorical_features.insert(name.to_string(), v);
                    }
                }
                ColumnRole::Numeric => {
                    if let Some(v) = ev.numeric(name) {
                        numeric_features.insert(name.to_string(), v);
                    }
                }
            }
        }
        for (name, value) in &ev.extra {
            if let (true, Some(v)) = (keep(name), value) {
                categorical_features.insert(name.clone(), v.clone());
            }
        }
        Some(Self {
            label,
            user,
            asset_key,
            collection_slug,
            categorical_features,
            numeric_features,
        })
    }

    /// Looks up a field by name. `user`, `asset_key` and `collection_slug`
    /// resolve to the record's identity members.
    pub fn categorical(&self, field: &str) -> Option<&str> {
        match field {
            "user" => Some(&self.user),
            "asset_key" => Some(&self.asset_key),
            "collection_slug" => Some(&self.collection_slug),
            _ => self.categorical_features.get(field).map(String::as_str),
        }
    }

    pub fn numeric(&self, field: &str) -> Option<f64> {
        self.numeric_features.get(field).copied()
    }
}

/// Fraction of events whose `column` entry is empty.
pub fn compute_empty_rate(events: &[RawEvent], column: &str) -> Result<f64, IngestError> {
    if events.is_empty() {
        return Err(IngestError::NoEvents);
    }
    let empty = events.iter().filter(|e| e.is_empty(column)).count();
    Ok(empty as f64 / events.len() as f64)
}

#[derive(Debug, Clone, Default)]
pub struct CleanOutput {
    /// Positive interactions, in input order.
    pub records: Vec<InteractionRecord>,
    /// Empty rate of every column seen, computed on the full input.
    pub empty_rates: BTreeMap<String, f64>,
    pub dropped_columns: Vec<String>,
    pub out_of_window: usize,
    pub non_interest: usize,
    pub missing_keys: usize,
}

/// Window filter, empty-rate pruning and labeling.
///
/// Empty rates are measured over the whole input, so a column is retained
/// exactly when its input empty rate is at most the threshold.
pub fn clean(events: &[RawEvent], cfg: &CleaningConfig) -> Result<CleanOutput, IngestError> {
    cfg.validate()?;
    let mut out = CleanOutput::default();
    if events.is_empty() {
        return Ok(out);
    }

    let mut columns: BTreeSet<String> = CANONICAL_COLUMNS
        .iter()
        .map(|(name, _)| name.to_string())
        .collect();
    for ev in events {
        columns.extend(ev.extra.keys().cloned());
    }
    let mut retained = BTreeSet::new();
    for col in columns {
        let rate = compute_empty_rate(events, &col)?;
        if rate > cfg.empty_rate_threshold {
            out.dropped_columns.push(col.clone());
        } else {
            retained.insert(col.clone());
        }
        out.empty_rates.insert(col, rate);
    }
    if let Some(key) = KEY_COLUMNS.iter().find(|k| !retained.contains(**k)) {
        return Err(IngestError::Config(format!(
            "key column {key} has empty rate {:.4} above threshold {}",
            out.empty_rates[*key], cfg.empty_rate_threshold
        )));
    }

    for ev in events {
        let in_window = ev
            .created_date
            .is_some_and(|t| t >= cfg.window_start && t <= cfg.window_end);
        if !in_window {
            out.out_of_window += 1;
            continue;
        }
        if !ev.event_type.is_interest() {
            out.non_interest += 1;
            continue;
        }
        match InteractionRecord::from_event(ev, 1, |c| retained.contains(c)) {
            Some(rec) => out.records.push(rec),
            None => out.missing_keys += 1,
        }
    }
    Ok(out)
}
