//! Candidate generation and top-K ranking for one user.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ffm::{FfmRow, Vocabulary};
use crate::ingest::InteractionRecord;
use crate::model::{predict_batch, ModelError, ModelParams};

/// Categorical feature carrying an asset's image link, when the source had one.
pub const IMAGE_URL_FIELD: &str = "asset_image_url";

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("catalog: {0}")]
    Catalog(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub collection_slug: String,
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    /// Latest feature values seen for the asset; `user` is replaced per request.
    pub record: InteractionRecord,
}

/// Every recommendable asset, plus what each user already holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub assets: BTreeMap<String, CatalogEntry>,
    #[serde(default)]
    pub owned: BTreeMap<String, BTreeSet<String>>,
}

impl Catalog {
    /// Builds from positive records; later records overwrite earlier ones.
    pub fn from_records(records: &[InteractionRecord]) -> Self {
        let mut c = Self::default();
        for r in records.iter().filter(|r| r.label == 1) {
            let display_name = r.categorical("asset_name").unwrap_or(&r.asset_key).to_string();
            c.assets.insert(
                r.asset_key.clone(),
                CatalogEntry {
                    collection_slug: r.collection_slug.clone(),
                    display_name,
                    image_url: r.categorical(IMAGE_URL_FIELD).map(str::to_string),
                    record: r.clone(),
                },
            );
            c.owned.entry(r.user.clone()).or_default().insert(r.asset_key.clone());
        }
        c
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RecommendError> {
        let json = serde_json::to_string(self).map_err(|e| RecommendError::Catalog(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RecommendError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| RecommendError::Catalog(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateOptions<'a> {
    pub collection: Option<&'a str>,
    /// Skip assets the user already bought.
    pub exclude_owned: bool,
}

/// One encoded row per catalog asset (restricted to the filter), keyed by
/// asset, with the user field set to `user`. Unknown users encode as id 0.
pub fn build_candidates(
    user: &str,
    catalog: &Catalog,
    vocab: &Vocabulary,
    opts: &CandidateOptions,
) -> Vec<(String, FfmRow)> {
    let owned = catalog.owned.get(user).filter(|_| opts.exclude_owned);
    catalog
        .assets
        .iter()
        .filter(|(_, e)| opts.collection.is_none_or(|c| e.collection_slug == c))
        .filter(|(key, _)| owned.is_none_or(|o| !o.contains(*key)))
        .map(|(key, e)| {
            let mut r = e.record.clone();
            r.user = user.to_string();
            r.label = 0;
            (key.clone(), vocab.encode(&r))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendedItem {
    pub asset_key: String,
    pub collection_slug: String,
    pub display_name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub user: String,
    pub items: Vec<RecommendedItem>,
}

/// Sorts by probability descending, then asset key ascending, and keeps `k`.
pub fn rank(scored: &mut Vec<(String, f64)>, k: usize) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
}

pub fn recommend(
    user: &str,
    k: usize,
    opts: &CandidateOptions,
    params: &ModelParams,
    catalog: &Catalog,
    vocab: &Vocabulary,
) -> Result<Recommendation, RecommendError> {
    if k == 0 {
        return Err(RecommendError::InvalidK);
    }
    let (keys, rows): (Vec<String>, Vec<FfmRow>) = build_candidates(user, catalog, vocab, opts).into_iter().unzip();
    let probs = predict_batch(params, &rows)?;
    let mut scored: Vec<(String, f64)> = keys.into_iter().zip(probs).collect();
    rank(&mut scored, k);
    let items = scored
        .into_iter()
        .map(|(asset_key, probability)| {
            let e = &catalog.assets[&asset_key];
            RecommendedItem {
                collection_slug: e.collection_slug.clone(),
                display_name: e.display_name.clone(),
                image_url: e.image_url.clone(),
                asset_key,
                probability,
            }
        })
        .collect();
    Ok(Recommendation { user: user.to_string(), items })
}
