use std::collections::{BTreeMap, HashSet};

use chrono::Duration;
use nftmine_core::eda::{correlation_matrix, market_trend, numeric_columns};
use nftmine_core::ffm::{default_field_spec, FfmRow, Vocabulary};
use nftmine_core::ingest::{
    clean, generate_synthetic, group_records, sample_negatives, split_dataset, CleaningConfig, Grouping,
    SplitFractions, SynthSpec,
};
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = SynthSpec> {
    (3usize..25, 5usize..40, 1usize..6, 20usize..300, 1usize..4, any::<u64>()).prop_map(
        |(n_users, n_assets, n_collections, n_events, n_clusters, seed)| SynthSpec {
            n_users,
            n_assets,
            n_collections,
            n_events,
            n_clusters,
            seed,
            ..Default::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cleaning_keeps_exactly_in_window_interest_events(spec in spec_strategy()) {
        let events = generate_synthetic(&spec);
        let cfg = CleaningConfig::default();
        let out = clean(&events, &cfg).unwrap();
        let expected = events
            .iter()
            .filter(|e| e.created_date.is_some_and(|t| t >= cfg.window_start && t <= cfg.window_end))
            .filter(|e| e.event_type.is_interest())
            .count();
        prop_assert_eq!(out.records.len() + out.missing_keys, expected);
        prop_assert!(out.records.iter().all(|r| r.label == 1));
    }

    #[test]
    fn negatives_are_disjoint_and_sized(spec in spec_strategy(), ratio in 0.1f64..3.0, seed in any::<u64>()) {
        let events = generate_synthetic(&spec);
        let cfg = CleaningConfig { negative_ratio: ratio, rng_seed: seed, ..Default::default() };
        let pos = clean(&events, &cfg).unwrap().records;
        prop_assume!(!pos.is_empty());
        let neg = sample_negatives(&pos, &cfg);
        let observed: HashSet<(&str, &str)> = pos.iter().map(|r| (r.user.as_str(), r.asset_key.as_str())).collect();
        let drawn: HashSet<(&str, &str)> = neg.records.iter().map(|r| (r.user.as_str(), r.asset_key.as_str())).collect();
        prop_assert_eq!(drawn.len(), neg.records.len());
        prop_assert!(drawn.is_disjoint(&observed));
        prop_assert!(neg.records.iter().all(|r| r.label == 0));
        let requested = (ratio * pos.len() as f64).round() as usize;
        prop_assert_eq!(neg.records.len(), requested.min(neg.pool_size));
        let users: HashSet<&str> = pos.iter().map(|r| r.user.as_str()).collect();
        let assets: HashSet<&str> = pos.iter().map(|r| r.asset_key.as_str()).collect();
        prop_assert_eq!(neg.pool_size, users.len() * assets.len() - observed.len());
    }

    #[test]
    fn split_partitions_the_records(spec in spec_strategy(), seed in any::<u64>(), val in 0.0f64..0.4, test in 0.0f64..0.4) {
        let pos = clean(&generate_synthetic(&spec), &CleaningConfig::default()).unwrap().records;
        let grouped = group_records(&pos, Grouping::AssetBased);
        let fractions = SplitFractions { train: 1.0 - val - test, validation: val, test };
        let b = split_dataset(grouped.clone(), fractions, seed, Grouping::AssetBased).unwrap();
        prop_assert_eq!(b.train.len() + b.validation.len() + b.test.len(), grouped.len());
        let key = |r: &nftmine_core::ingest::InteractionRecord| serde_json::to_string(r).unwrap();
        let mut before: Vec<String> = grouped.iter().map(key).collect();
        let mut after: Vec<String> = b.train.iter().chain(&b.validation).chain(&b.test).map(key).collect();
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn trend_matches_brute_force_rebucketing(spec in spec_strategy(), minutes in 1i64..600) {
        let events = generate_synthetic(&spec);
        let width = minutes * 60;
        let series = market_trend(&events, Duration::minutes(minutes)).unwrap();
        let mut expected: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
        for e in &events {
            if let Some(t) = e.created_date {
                let slot = expected.entry(t.timestamp().div_euclid(width) * width).or_default();
                slot.0 += 1;
                slot.1 += e.absolute_price_usd.unwrap_or(0.0);
            }
        }
        prop_assert!(series.points.windows(2).all(|w| w[1].bucket_start.timestamp() - w[0].bucket_start.timestamp() == width));
        for p in &series.points {
            let (n, v) = expected.get(&p.bucket_start.timestamp()).copied().unwrap_or_default();
            prop_assert_eq!(p.tx_count, n);
            prop_assert!((p.usd_volume - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
        let counted: usize = series.points.iter().map(|p| p.tx_count).sum();
        prop_assert_eq!(counted, expected.values().map(|x| x.0).sum::<usize>());
    }

    #[test]
    fn correlation_is_symmetric_and_bounded(spec in spec_strategy()) {
        let pos = clean(&generate_synthetic(&spec), &CleaningConfig::default()).unwrap().records;
        prop_assume!(pos.len() >= 2);
        let cols = numeric_columns(&pos);
        let m = correlation_matrix(&pos, &cols).unwrap();
        for i in 0..cols.len() {
            for j in 0..cols.len() {
                prop_assert_eq!(m.values[i][j], m.values[j][i]);
                if let Some(r) = m.values[i][j] {
                    prop_assert!((-1.0..=1.0).contains(&r));
                }
            }
            prop_assert!(m.values[i][i].is_none_or(|r| r == 1.0));
        }
    }

    #[test]
    fn encoded_rows_survive_the_text_format(spec in spec_strategy()) {
        let pos = clean(&generate_synthetic(&spec), &CleaningConfig::default()).unwrap().records;
        prop_assume!(!pos.is_empty());
        let vocab = Vocabulary::build(&pos, &default_field_spec()).unwrap();
        for r in &pos {
            let row = vocab.encode(r);
            prop_assert!(row.entries.iter().all(|e| (e.field as usize) < vocab.n_fields() && e.feature <= vocab.n_features));
            let line = row.render();
            let back = FfmRow::parse_line(&line).unwrap();
            prop_assert_eq!(back.render(), line);
        }
    }
}
