use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::InteractionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    AssetBased,
    CollectionBased,
}

/// Collection, categorical and numeric features shared by one key.
type Profile = (String, BTreeMap<String, String>, BTreeMap<String, f64>);

#[derive(Default)]
struct KeyAggregate {
    numeric: BTreeMap<String, (f64, usize)>,
    categorical: BTreeMap<String, BTreeMap<String, usize>>,
    collections: BTreeMap<String, usize>,
}

/// Most frequent value; ties go to the lexicographically smallest.
fn mode(counts: &BTreeMap<String, usize>) -> Option<&str> {
    let mut best: Option<(&str, usize)> = None;
    for (v, &c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}

/// Re-keys records by asset name or collection slug.
///
/// Every record sharing a key receives that key's aggregated features
/// (numeric mean, categorical mode). Records are then merged per
/// (user, key); a merged pair is positive if any of its records was.
pub fn group_records(records: &[InteractionRecord], mode_: Grouping) -> Vec<InteractionRecord> {
    let key_of = |r: &InteractionRecord| -> String {
        match mode_ {
            Grouping::AssetBased => r
                .categorical_features
                .get("asset_name")
                .cloned()
                .unwrap_or_else(|| r.asset_key.clone()),
            Grouping::CollectionBased => r.collection_slug.clone(),
        }
    };

    let mut aggregates: HashMap<String, KeyAggregate> = HashMap::new();
    let mut merged: Vec<(String, String, u8)> = Vec::new();
    let mut slot: HashMap<(String, String), usize> = HashMap::new();
    for r in records {
        let key = key_of(r);
        let agg = aggregates.entry(key.clone()).or_default();
        for (k, &v) in &r.numeric_features {
            let e = agg.numeric.entry(k.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        for (k, v) in &r.categorical_features {
            *agg.categorical.entry(k.clone()).or_default().entry(v.clone()).or_insert(0) += 1;
        }
        *agg.collections.entry(r.collection_slug.clone()).or_insert(0) += 1;

        match slot.get(&(r.user.clone(), key.clone())) {
            Some(&i) => merged[i].2 = merged[i].2.max(r.label),
            None => {
                slot.insert((r.user.clone(), key.clone()), merged.len());
                merged.push((r.user.clone(), key, r.label));
            }
        }
    }

    let profiles: HashMap<&String, Profile> =
        aggregates
            .iter()
            .map(|(key, agg)| {
                let numeric = agg
                    .numeric
                    .iter()
                    .map(|(k, (sum, n))| (k.clone(), sum / *n as f64))
                    .collect();
                let categorical = agg
                    .categorical
                    .iter()
                    .filter_map(|(k, counts)| mode(counts).map(|v| (k.clone(), v.to_string())))
                    .collect();
                let collection = match mode_ {
                    Grouping::CollectionBased => key.clone(),
                    Grouping::AssetBased => mode(&agg.collections).unwrap_or_default().to_string(),
                };
                (key, (collection, categorical, numeric))
            })
            .collect();

    merged
        .into_iter()
        .map(|(user, key, label)| {
            let (collection, categorical, numeric) = profiles[&key].clone();
            InteractionRecord {
                label,
                user,
                asset_key: key,
                collection_slug: collection,
                categorical_features: categorical,
                numeric_features: numeric,
            }
        })
        .collect()
}
