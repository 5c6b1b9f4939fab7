use nftmine_core::baselines::{lr_predict, lr_train, nb_posterior, nb_predict, nb_train, LrConfig, LrModel};
use nftmine_core::ffm::{FfmEntry, FfmRow};
use proptest::prelude::*;

const N: usize = 6;

fn rows_strategy() -> impl Strategy<Value = Vec<FfmRow>> {
    proptest::collection::vec(
        (0u8..=1, proptest::collection::btree_map(0u32..3, (0..=N as u32, 0.1f64..4.0), 0..3)),
        4..30,
    )
    .prop_map(|rs| {
        let mut rows: Vec<FfmRow> = rs
            .into_iter()
            .map(|(label, m)| FfmRow {
                label,
                entries: m.into_iter().map(|(field, (feature, value))| FfmEntry { field, feature, value }).collect(),
            })
            .collect();
        rows[0].label = 0;
        rows[1].label = 1;
        rows
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nb_posteriors_are_a_distribution(rows in rows_strategy()) {
        let m = nb_train(&rows, N).unwrap();
        for r in &rows {
            let post = nb_posterior(&m, r).unwrap();
            prop_assert!((post[0] + post[1] - 1.0).abs() < 1e-12);
            let p = nb_predict(&m, r).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn nb_ignores_row_order(rows in rows_strategy()) {
        let a = nb_train(&rows, N).unwrap();
        let mut rev = rows.clone();
        rev.reverse();
        let b = nb_train(&rev, N).unwrap();
        for r in &rows {
            let (pa, pb) = (nb_predict(&a, r).unwrap(), nb_predict(&b, r).unwrap());
            prop_assert!((pa - pb).abs() <= 1e-9 * pa.max(pb).max(1e-300) + 1e-12);
        }
    }

    #[test]
    fn lr_logit_survives_inverse_rescaling(rows in rows_strategy(), scale in 0.1f64..10.0) {
        let m = lr_train(&rows, N, &LrConfig { epochs: 3, ..Default::default() }).unwrap();
        let mut rescaled = LrModel { weights: m.weights.iter().map(|w| w / scale).collect(), ..m.clone() };
        rescaled.bias = m.bias;
        for r in &rows {
            let scaled_row = FfmRow {
                label: r.label,
                entries: r.entries.iter().map(|e| FfmEntry { value: e.value * scale, ..*e }).collect(),
            };
            prop_assert!((m.logit(r) - rescaled.logit(&scaled_row)).abs() < 1e-9);
            let p = lr_predict(&m, r).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }
}
