use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CleaningConfig, InteractionRecord};

#[derive(Debug, Clone, Default)]
pub struct NegativeSample {
    pub records: Vec<InteractionRecord>,
    /// round(ratio * positives) before capping at the pool size.
    pub requested: usize,
    pub pool_size: usize,
}

impl NegativeSample {
    /// True when fewer negatives were produced than requested.
    pub fn is_capped(&self) -> bool {
        self.records.len() < self.requested
    }
}

/// Samples label-0 (user, asset) pairs uniformly from the cross product of
/// observed users and assets, minus observed positive pairs.
///
/// Each negative copies the features of the first positive record of its asset.
pub fn sample_negatives(positives: &[InteractionRecord], cfg: &CleaningConfig) -> NegativeSample {
    let users: Vec<&str> = positives
        .iter()
        .map(|r| r.user.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut asset_profile: BTreeMap<&str, &InteractionRecord> = BTreeMap::new();
    for r in positives {
        asset_profile.entry(r.asset_key.as_str()).or_insert(r);
    }
    let assets: Vec<&InteractionRecord> = asset_profile.into_values().collect();
    let observed: HashSet<(&str, &str)> = positives
        .iter()
        .map(|r| (r.user.as_str(), r.asset_key.as_str()))
        .collect();

    let n_assets = assets.len();
    let grid = users.len() * n_assets;
    let pool_size = grid - observed.len();
    let requested = (cfg.negative_ratio * positives.len() as f64).round() as usize;
    let k = requested.min(pool_size);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let is_free = |cell: usize| {
        let (u, a) = (cell / n_assets, cell % n_assets);
        !observed.contains(&(users[u], assets[a].asset_key.as_str()))
    };

    let cells: Vec<usize> = if 2 * k <= pool_size {
        // Sparse draw: rejection over the grid keeps memory proportional to k.
        let mut chosen = Vec::with_capacity(k);
        let mut seen = HashSet::with_capacity(k);
        while chosen.len() < k {
            let cell = rng.random_range(0..grid);
            if is_free(cell) && seen.insert(cell) {
                chosen.push(cell);
            }
        }
        chosen
    } else {
        let pool: Vec<usize> = (0..grid).filter(|&c| is_free(c)).collect();
        index::sample(&mut rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    };

    if k < requested {
        log::warn!(
            "negative pool holds {pool_size} pairs; requested {requested}, produced {k}"
        );
    }

    let records = cells
        .into_iter()
        .map(|cell| {
            let profile = assets[cell % n_assets];
            InteractionRecord {
                label: 0,
                user: users[cell / n_assets].to_string(),
                ..profile.clone()
            }
        })
        .collect();
    NegativeSample {
        records,
        requested,
        pool_size,
    }
}
