use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Architecture, ModelConfig, ModelParams};
use crate::ffm::{FfmEntry, FfmRow};

const STEP: f64 = 1e-5;
/// Floor on the relative-error denominator, so that gradients which are
/// zero up to rounding are compared absolutely.
const DENOM_FLOOR: f64 = 1e-6;
/// Minimum distance of every relu pre-activation from the kink.
const KINK_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub n_checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub trials: usize,
    /// One entry per parameter tensor, in directory order.
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
}

impl ModelConfig {
    /// Tiny architecture used by [`gradient_check`].
    pub fn gradcheck_default() -> Self {
        Self {
            n_fields: 4,
            n_features: 9,
            embedding_dim: 4,
            cin_layer_sizes: vec![2],
            dnn_layer_sizes: vec![3],
            l2: 1e-2,
            ..Default::default()
        }
    }
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(DENOM_FLOOR)
}

fn random_instance(arch: &Architecture, rng: &mut ChaCha8Rng) -> (ModelParams, FfmRow) {
    let mut p = ModelParams::zeros(arch.clone());
    for s in p.slices_mut() {
        for v in s {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    let mut entries = Vec::new();
    for field in 0..arch.n_fields as u32 {
        if entries.is_empty() || rng.random_bool(0.75) {
            let feature = rng.random_range(0..=arch.n_features as u32);
            let value = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.3..2.0) };
            entries.push(FfmEntry { field, feature, value });
        }
    }
    (p, FfmRow { label: rng.random_range(0..=1), entries })
}

/// Shifts DNN biases, layer by layer, so that no pre-activation lies within
/// `KINK_MARGIN` of zero on `row`.
fn avoid_kinks(p: &mut ModelParams, row: &FfmRow) {
    for l in 0..p.dnn_biases.len() {
        let pre = p.forward_trace(row).expect("ids in range").dnn_pre[l].clone();
        for (b, z) in p.dnn_biases[l].iter_mut().zip(pre) {
            if z.abs() < KINK_MARGIN {
                *b += if z >= 0.0 { KINK_MARGIN - z } else { -KINK_MARGIN - z };
            }
        }
    }
}

/// Compares analytic gradients with central differences (step 1e-5) on
/// `n_trials` random parameter sets, rows and labels; every scalar of every
/// tensor is checked.
pub fn gradient_check(cfg: &ModelConfig, n_trials: usize, seed: u64) -> GradCheckReport {
    let arch = Architecture::from_config(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = ModelParams::zeros(arch.clone()).tensor_names();
    let mut tensors: Vec<TensorCheck> =
        names.into_iter().map(|name| TensorCheck { name, n_checked: 0, max_rel_error: 0.0 }).collect();

    for _ in 0..n_trials {
        let (mut p, row) = random_instance(&arch, &mut rng);
        avoid_kinks(&mut p, &row);
        let analytic = p.backward(&row, row.label, cfg.l2).expect("ids in range");
        let loss = |q: &ModelParams| q.loss(&row, row.label, cfg.l2).expect("ids in range");
        let grads = analytic.slices();
        for (t, g) in grads.iter().enumerate() {
            for (i, &analytic_i) in g.iter().enumerate() {
                let mut plus = p.clone();
                plus.slices_mut()[t][i] += STEP;
                let mut minus = p.clone();
                minus.slices_mut()[t][i] -= STEP;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * STEP);
                let err = rel_error(analytic_i, numeric);
                let entry = &mut tensors[t];
                entry.n_checked += 1;
                entry.max_rel_error = entry.max_rel_error.max(err);
            }
        }
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    GradCheckReport { trials: n_trials, tensors, max_rel_error }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_passes() {
        let r = gradient_check(&ModelConfig::gradcheck_default(), 5, 1);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn every_tensor_listed_once() {
        let cfg = ModelConfig { cin_layer_sizes: vec![2, 3], dnn_layer_sizes: vec![3, 2], ..ModelConfig::gradcheck_default() };
        let r = gradient_check(&cfg, 2, 3);
        let names: Vec<_> = r.tensors.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ModelParams::zeros(Architecture::from_config(&cfg)).tensor_names());
        assert!(r.tensors.iter().all(|t| t.n_checked > 0));
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn kinks_are_avoided() {
        let cfg = ModelConfig::gradcheck_default();
        let arch = Architecture::from_config(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (mut p, row) = random_instance(&arch, &mut rng);
            avoid_kinks(&mut p, &row);
            let t = p.forward_trace(&row).unwrap();
            assert!(t.dnn_pre.iter().flatten().all(|z| z.abs() >= KINK_MARGIN - 1e-12));
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        assert!(rel_error(1.0, 1.001) > 1e-4);
        assert_eq!(rel_error(0.0, 0.0), 0.0);
    }
}
