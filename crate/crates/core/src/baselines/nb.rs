use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde_json::json;

use super::{check_all, check_ids, BaselineError};
use crate::container::{Container, ContainerError};
use crate::ffm::FfmRow;
use crate::util::open_unit;

pub const NB_KIND: &str = "nb";
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes over the dense projection of a row: a vector of
/// length `n_features + 1` holding each entry's value at its feature id
/// (summed on collisions) and zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    /// `[P(y = 0), P(y = 1)]`.
    pub class_priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

fn dense(row: &FfmRow) -> BTreeMap<usize, f64> {
    let mut x = BTreeMap::new();
    for e in &row.entries {
        *x.entry(e.feature as usize).or_insert(0.0) += e.value;
    }
    x
}

fn log_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

impl NbModel {
    pub fn n_features(&self) -> usize {
        self.means[0].len() - 1
    }

    fn log_joint(&self, c: usize, x: &BTreeMap<usize, f64>) -> f64 {
        let (mu, var) = (&self.means[c], &self.variances[c]);
        let mut total = self.class_priors[c].ln();
        for d in 0..mu.len() {
            total += log_density(x.get(&d).copied().unwrap_or(0.0), mu[d], var[d]);
        }
        total
    }

    pub fn to_container(&self) -> Container {
        let n = self.means[0].len();
        let mut c = Container::new(NB_KIND, json!({ "variance_floor": VARIANCE_FLOOR }));
        c.push("class_priors", vec![2], &self.class_priors);
        c.push("means", vec![2, n], &[self.means[0].as_slice(), &self.means[1]].concat());
        c.push("variances", vec![2, n], &[self.variances[0].as_slice(), &self.variances[1]].concat());
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self, BaselineError> {
        c.expect_kind(NB_KIND)?;
        let n = c
            .tensors
            .iter()
            .find(|(e, _)| e.name == "means")
            .and_then(|(e, _)| e.shape.get(1).copied())
            .filter(|&n| n > 0)
            .ok_or_else(|| ContainerError::Header("means must be 2 x n".into()))?;
        let priors = c.take("class_priors", &[2])?;
        let means = c.take("means", &[2, n])?;
        let vars = c.take("variances", &[2, n])?;
        Ok(Self {
            class_priors: [priors[0], priors[1]],
            means: [means[..n].to_vec(), means[n..].to_vec()],
            variances: [vars[..n].to_vec(), vars[n..].to_vec()],
        })
    }
}

/// Per-class priors, means and population variances (floored).
pub fn nb_train(rows: &[FfmRow], n_features: usize) -> Result<NbModel, BaselineError> {
    if rows.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    check_all(rows, n_features)?;
    let dim = n_features + 1;
    let mut count = [0usize; 2];
    let mut sum = [vec![0.0; dim], vec![0.0; dim]];
    for r in rows {
        let c = (r.label == 1) as usize;
        count[c] += 1;
        for (d, v) in dense(r) {
            sum[c][d] += v;
        }
    }
    if let Some(c) = count.iter().position(|&n| n == 0) {
        return Err(BaselineError::SingleClass(1 - c as u8));
    }
    let means = [0, 1].map(|c| sum[c].iter().map(|s| s / count[c] as f64).collect::<Vec<_>>());
    // squared deviations: absent coordinates contribute mean^2 each
    let mut sq = [vec![0.0; dim], vec![0.0; dim]];
    let mut present = [vec![0usize; dim], vec![0usize; dim]];
    for r in rows {
        let c = (r.label == 1) as usize;
        for (d, v) in dense(r) {
            sq[c][d] += (v - means[c][d]).powi(2);
            present[c][d] += 1;
        }
    }
    let variances = [0, 1].map(|c| {
        (0..dim)
            .map(|d| {
                let absent = (count[c] - present[c][d]) as f64;
                let ss = sq[c][d] + absent * means[c][d].powi(2);
                (ss / count[c] as f64).max(VARIANCE_FLOOR)
            })
            .collect::<Vec<_>>()
    });
    let total = rows.len() as f64;
    Ok(NbModel {
        class_priors: [count[0] as f64 / total, count[1] as f64 / total],
        means,
        variances,
    })
}

/// `[P(y = 0 | x), P(y = 1 | x)]` via log-sum-exp.
pub fn nb_posterior(model: &NbModel, row: &FfmRow) -> Result<[f64; 2], BaselineError> {
    check_ids(row, model.n_features())?;
    let x = dense(row);
    let a = [model.log_joint(0, &x), model.log_joint(1, &x)];
    let m = a[0].max(a[1]);
    let lse = m + ((a[0] - m).exp() + (a[1] - m).exp()).ln();
    Ok([(a[0] - lse).exp(), (a[1] - lse).exp()])
}

/// Posterior of the positive class, strictly inside (0, 1).
pub fn nb_predict(model: &NbModel, row: &FfmRow) -> Result<f64, BaselineError> {
    Ok(open_unit(nb_posterior(model, row)?[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffm::FfmEntry;

    fn one(feature: u32, value: f64) -> FfmRow {
        FfmRow { label: 0, entries: vec![FfmEntry { field: 0, feature, value }] }
    }

    fn model(priors: [f64; 2], means: [f64; 2], var: f64) -> NbModel {
        NbModel {
            class_priors: priors,
            means: [vec![0.0, means[0]], vec![0.0, means[1]]],
            variances: [vec![1.0, var], vec![1.0, var]],
        }
    }

    #[test]
    fn symmetric_classes_at_the_midpoint() {
        let m = model([0.5, 0.5], [-1.0, 1.0], 0.7);
        assert!((nb_predict(&m, &one(1, 0.0)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn query_at_the_positive_mean() {
        let (var, mu) = (0.05, 1.0);
        let m = model([0.5, 0.5], [-mu, mu], var);
        // closed form: the log-likelihood ratio at x = mu is (2 mu)^2 / (2 var)
        let expected = 1.0 / (1.0 + (-(2.0 * mu).powi(2) / (2.0 * var)).exp());
        let p = nb_predict(&m, &one(1, mu)).unwrap();
        assert!(p > 0.99);
        assert!((p - expected).abs() < 1e-12);
    }

    #[test]
    fn prior_only_case() {
        let m = model([0.1, 0.9], [0.3, 0.3], 2.0);
        let post = nb_posterior(&m, &one(1, 5.0)).unwrap();
        assert!((post[1] - 0.9).abs() < 1e-12);
        assert!((post[0] + post[1] - 1.0).abs() < 1e-12);
    }

    fn rows() -> Vec<FfmRow> {
        let mk = |label, entries: Vec<(u32, f64)>| FfmRow {
            label,
            entries: entries.into_iter().enumerate().map(|(f, (feature, value))| FfmEntry { field: f as u32, feature, value }).collect(),
        };
        vec![
            mk(1, vec![(1, 1.0), (3, 2.0)]),
            mk(1, vec![(1, 1.0), (3, 4.0)]),
            mk(0, vec![(2, 1.0), (3, 1.0)]),
            mk(0, vec![(2, 1.0)]),
            mk(1, vec![(2, 1.0), (3, 3.0)]),
        ]
    }

    #[test]
    fn training_statistics() {
        let m = nb_train(&rows(), 3).unwrap();
        assert_eq!(m.class_priors, [0.4, 0.6]);
        // class 1 feature 3 values {2, 4, 3}: mean 3, population variance 2/3
        assert!((m.means[1][3] - 3.0).abs() < 1e-15);
        assert!((m.variances[1][3] - 2.0 / 3.0).abs() < 1e-15);
        // class 0 feature 3 values {1, 0}: mean 0.5, variance 0.25
        assert!((m.variances[0][3] - 0.25).abs() < 1e-15);
        // never-seen coordinate is floored
        assert_eq!(m.variances[0][0], VARIANCE_FLOOR);
        assert_eq!(m.variances[0][1], VARIANCE_FLOOR);
    }

    #[test]
    fn order_invariant_and_persistable() {
        let mut r = rows();
        let a = nb_train(&r, 3).unwrap();
        r.reverse();
        let b = nb_train(&r, 3).unwrap();
        for q in &r {
            assert!((nb_predict(&a, q).unwrap() - nb_predict(&b, q).unwrap()).abs() < 1e-12);
        }
        let back = NbModel::from_container(crate::container::decode(&crate::container::encode(&a.to_container())).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn single_class_is_an_error() {
        let r: Vec<_> = rows().into_iter().filter(|r| r.label == 1).collect();
        assert!(matches!(nb_train(&r, 3), Err(BaselineError::SingleClass(1))));
        assert!(nb_predict(&nb_train(&rows(), 3).unwrap(), &one(7, 1.0)).is_err());
    }
}
