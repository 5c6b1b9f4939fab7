//! Forward pass and exact gradients of the xDeepFM scorer.
//!
//! With `X0` the `m x D` field embedding matrix (row `f` is the embedding of
//! field `f`'s feature scaled by its value, zero when the field is absent):
//!
//! ```text
//! X^k[h] = sum_i sum_j W^k[h][i][j] * (X^{k-1}[i] .* X0[j])     (CIN layer k)
//! p^k[h] = sum_d X^k[h][d]                                       (sum pooling)
//! a^l    = relu(A^l a^{l-1} + b^l),  a^0 = flatten(X0)           (DNN)
//! logit  = bias + sum value * w[feature] + u . [p^1 .. p^T ; a^L]
//! ```
//!
//! The per-example loss is `ln(1 + e^logit) - y * logit` plus
//! `l2 / 2` times the squared norm of the active embedding rows and linear
//! weights (features present in the row) and of every CIN filter, DNN
//! weight matrix and output weight. Biases are not penalized.

use std::collections::BTreeSet;

use super::{ModelError, ModelParams};
use crate::ffm::FfmRow;
use crate::util::{open_unit, sigmoid};

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `m x D`, row-major.
    pub x0: Vec<f64>,
    /// Per CIN layer, `H_k x D`.
    pub cin: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
    /// Per DNN layer, pre-activation values.
    pub dnn_pre: Vec<Vec<f64>>,
    /// Per DNN layer, post-activation values.
    pub dnn_act: Vec<Vec<f64>>,
    pub logit: f64,
}

impl Trace {
    pub fn probability(&self) -> f64 {
        open_unit(sigmoid(self.logit))
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl ModelParams {
    pub(crate) fn check_row(&self, row: &FfmRow) -> Result<(), ModelError> {
        for e in &row.entries {
            if e.field as usize >= self.arch.n_fields || e.feature as usize > self.arch.n_features {
                return Err(ModelError::IdOutOfRange {
                    field: e.field,
                    feature: e.feature,
                    n_fields: self.arch.n_fields,
                    n_features: self.arch.n_features,
                });
            }
        }
        Ok(())
    }

    pub fn forward_trace(&self, row: &FfmRow) -> Result<Trace, ModelError> {
        self.check_row(row)?;
        let a = &self.arch;
        let (m, d) = (a.n_fields, a.embedding_dim);

        let mut x0 = vec![0.0; m * d];
        let mut logit = self.bias;
        for e in &row.entries {
            let (f, j) = (e.field as usize, e.feature as usize);
            let emb = &self.embeddings[j * d..(j + 1) * d];
            for (x, &w) in x0[f * d..(f + 1) * d].iter_mut().zip(emb) {
                *x += e.value * w;
            }
            logit += e.value * self.linear_weights[j];
        }

        let mut cin: Vec<Vec<f64>> = Vec::with_capacity(a.cin_layer_sizes.len());
        let mut pooled: Vec<f64> = Vec::with_capacity(a.cin_pooled_len());
        for (k, filters) in self.cin_filters.iter().enumerate() {
            let h_out = a.cin_layer_sizes[k];
            let h_in = a.cin_input(k);
            let prev: &[f64] = if k == 0 { &x0 } else { &cin[k - 1] };
            let mut out = vec![0.0; h_out * d];
            for h in 0..h_out {
                let acc = &mut out[h * d..(h + 1) * d];
                for i in 0..h_in {
                    let xi = &prev[i * d..(i + 1) * d];
                    for j in 0..m {
                        let w = filters[(h * h_in + i) * m + j];
                        if w == 0.0 {
                            continue;
                        }
                        let xj = &x0[j * d..(j + 1) * d];
                        for t in 0..d {
                            acc[t] += w * xi[t] * xj[t];
                        }
                    }
                }
                pooled.push(acc.iter().sum::<f64>());
            }
            cin.push(out);
        }

        let mut dnn_pre = Vec::with_capacity(a.dnn_layer_sizes.len());
        let mut dnn_act: Vec<Vec<f64>> = Vec::with_capacity(a.dnn_layer_sizes.len());
        for (l, (w, b)) in self.dnn_weights.iter().zip(&self.dnn_biases).enumerate() {
            let input: &[f64] = if l == 0 { &x0 } else { &dnn_act[l - 1] };
            let n_in = input.len();
            let z: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(o, &bo)| bo + w[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            dnn_act.push(z.iter().map(|&v| v.max(0.0)).collect());
            dnn_pre.push(z);
        }

        let top = dnn_act.last().map(Vec::as_slice).unwrap_or(&[]);
        logit += pooled
            .iter()
            .chain(top)
            .zip(&self.output_weights)
            .map(|(x, w)| x * w)
            .sum::<f64>();

        Ok(Trace { x0, cin, pooled, dnn_pre, dnn_act, logit })
    }

    /// Click probability, strictly inside (0, 1).
    pub fn forward(&self, row: &FfmRow) -> Result<f64, ModelError> {
        Ok(self.forward_trace(row)?.probability())
    }

    /// Per-example objective minimized by training (cross-entropy plus L2).
    pub fn loss(&self, row: &FfmRow, label: u8, l2: f64) -> Result<f64, ModelError> {
        let t = self.forward_trace(row)?;
        let y = label as f64;
        Ok(softplus(t.logit) - y * t.logit + 0.5 * l2 * self.penalty_norm(row))
    }

    fn penalty_norm(&self, row: &FfmRow) -> f64 {
        let d = self.arch.embedding_dim;
        let sq = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>();
        let mut total = 0.0;
        for j in active_features(row) {
            total += sq(&self.embeddings[j * d..(j + 1) * d]) + self.linear_weights[j].powi(2);
        }
        total += self.cin_filters.iter().map(|f| sq(f)).sum::<f64>();
        total += self.dnn_weights.iter().map(|w| sq(w)).sum::<f64>();
        total + sq(&self.output_weights)
    }

    /// Adds `scale` times the gradient of [`ModelParams::loss`] into `grads`.
    pub fn accumulate_gradients(
        &self,
        row: &FfmRow,
        label: u8,
        trace: &Trace,
        l2: f64,
        scale: f64,
        grads: &mut ModelParams,
    ) {
        let a = &self.arch;
        let (m, d) = (a.n_fields, a.embedding_dim);
        let g = (sigmoid(trace.logit) - label as f64) * scale;

        grads.bias += g;
        for e in &row.entries {
            grads.linear_weights[e.feature as usize] += g * e.value;
        }

        let top = trace.dnn_act.last().map(Vec::as_slice).unwrap_or(&[]);
        for (gw, x) in grads.output_weights.iter_mut().zip(trace.pooled.iter().chain(top)) {
            *gw += g * x;
        }

        let mut dx0 = vec![0.0; m * d];

        // CIN, last layer first. `dcur` holds dLoss/dX^k for the layer being processed.
        let n_cin = self.cin_filters.len();
        let mut offsets = Vec::with_capacity(n_cin);
        let mut off = 0;
        for &h in &a.cin_layer_sizes {
            offsets.push(off);
            off += h;
        }
        let pooled_grad = |k: usize, buf: &mut [f64]| {
            for h in 0..a.cin_layer_sizes[k] {
                let gp = g * self.output_weights[offsets[k] + h];
                for v in &mut buf[h * d..(h + 1) * d] {
                    *v += gp;
                }
            }
        };
        if n_cin > 0 {
            let mut dcur = vec![0.0; a.cin_layer_sizes[n_cin - 1] * d];
            pooled_grad(n_cin - 1, &mut dcur);
            for k in (0..n_cin).rev() {
                let h_out = a.cin_layer_sizes[k];
                let h_in = a.cin_input(k);
                let prev: &[f64] = if k == 0 { &trace.x0 } else { &trace.cin[k - 1] };
                let filters = &self.cin_filters[k];
                let gfilters = &mut grads.cin_filters[k];
                let mut dprev = vec![0.0; h_in * d];
                for h in 0..h_out {
                    let dout = &dcur[h * d..(h + 1) * d];
                    for i in 0..h_in {
                        let xi = &prev[i * d..(i + 1) * d];
                        for j in 0..m {
                            let idx = (h * h_in + i) * m + j;
                            let w = filters[idx];
                            let xj = &trace.x0[j * d..(j + 1) * d];
                            let mut gw = 0.0;
                            for t in 0..d {
                                let prod = dout[t] * xi[t] * xj[t];
                                gw += prod;
                                if w != 0.0 {
                                    dprev[i * d + t] += w * dout[t] * xj[t];
                                    dx0[j * d + t] += w * dout[t] * xi[t];
                                }
                            }
                            gfilters[idx] += gw;
                        }
                    }
                }
                if k == 0 {
                    for (a, b) in dx0.iter_mut().zip(&dprev) {
                        *a += b;
                    }
                } else {
                    pooled_grad(k - 1, &mut dprev);
                    dcur = dprev;
                }
            }
        }

        // DNN, last layer first.
        let n_dnn = self.dnn_weights.len();
        if n_dnn > 0 {
            let top_off = a.cin_pooled_len();
            let mut dact: Vec<f64> = (0..a.dnn_layer_sizes[n_dnn - 1])
                .map(|o| g * self.output_weights[top_off + o])
                .collect();
            for l in (0..n_dnn).rev() {
                let input: &[f64] = if l == 0 { &trace.x0 } else { &trace.dnn_act[l - 1] };
                let n_in = input.len();
                let w = &self.dnn_weights[l];
                let dz: Vec<f64> = dact
                    .iter()
                    .zip(&trace.dnn_pre[l])
                    .map(|(da, &z)| if z > 0.0 { *da } else { 0.0 })
                    .collect();
                let mut dinput = vec![0.0; n_in];
                let gw = &mut grads.dnn_weights[l];
                for (o, &dzo) in dz.iter().enumerate() {
                    if dzo == 0.0 {
                        continue;
                    }
                    grads.dnn_biases[l][o] += dzo;
                    let row_w = &w[o * n_in..(o + 1) * n_in];
                    let row_g = &mut gw[o * n_in..(o + 1) * n_in];
                    for t in 0..n_in {
                        row_g[t] += dzo * input[t];
                        dinput[t] += dzo * row_w[t];
                    }
                }
                if l == 0 {
                    for (a, b) in dx0.iter_mut().zip(&dinput) {
                        *a += b;
                    }
                } else {
                    dact = dinput;
                }
            }
        }

        for e in &row.entries {
            let (f, j) = (e.field as usize, e.feature as usize);
            let ge = &mut grads.embeddings[j * d..(j + 1) * d];
            for (gv, dv) in ge.iter_mut().zip(&dx0[f * d..(f + 1) * d]) {
                *gv += e.value * dv;
            }
        }

        if l2 > 0.0 {
            let c = l2 * scale;
            for j in active_features(row) {
                for t in 0..d {
                    grads.embeddings[j * d + t] += c * self.embeddings[j * d + t];
                }
                grads.linear_weights[j] += c * self.linear_weights[j];
            }
            let dense = |g: &mut [f64], p: &[f64]| {
                for (gv, pv) in g.iter_mut().zip(p) {
                    *gv += c * pv;
                }
            };
            for (gf, f) in grads.cin_filters.iter_mut().zip(&self.cin_filters) {
                dense(gf, f);
            }
            for (gw, w) in grads.dnn_weights.iter_mut().zip(&self.dnn_weights) {
                dense(gw, w);
            }
            dense(&mut grads.output_weights, &self.output_weights);
        }
    }

    /// Gradient of [`ModelParams::loss`] for one example.
    pub fn backward(&self, row: &FfmRow, label: u8, l2: f64) -> Result<ModelParams, ModelError> {
        let trace = self.forward_trace(row)?;
        let mut grads = ModelParams::zeros_like(self);
        self.accumulate_gradients(row, label, &trace, l2, 1.0, &mut grads);
        Ok(grads)
    }
}

fn active_features(row: &FfmRow) -> BTreeSet<usize> {
    row.entries.iter().map(|e| e.feature as usize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffm::FfmEntry;
    use crate::model::{init_params, Architecture, ModelConfig};

    fn entry(field: u32, feature: u32, value: f64) -> FfmEntry {
        FfmEntry { field, feature, value }
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            n_fields: 3,
            n_features: 6,
            embedding_dim: 3,
            cin_layer_sizes: vec![2, 2],
            dnn_layer_sizes: vec![4],
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_params_give_one_half() {
        let p = ModelParams::zeros(Architecture::from_config(&small_cfg()));
        let row = FfmRow { label: 1, entries: vec![entry(0, 1, 1.0), entry(2, 6, 3.5)] };
        assert_eq!(p.forward(&row).unwrap(), 0.5);
        let g = p.backward(&row, 1, 0.0).unwrap();
        assert_eq!(g.bias, -0.5);
    }

    #[test]
    fn empty_row_scores_the_bias() {
        let mut p = init_params(&small_cfg());
        p.bias = 0.7;
        let row = FfmRow { label: 0, entries: vec![] };
        assert_eq!(p.forward(&row).unwrap(), sigmoid(0.7));
    }

    #[test]
    fn out_of_range_ids_are_rejected() {
        let p = init_params(&small_cfg());
        let bad_field = FfmRow { label: 0, entries: vec![entry(3, 1, 1.0)] };
        let bad_feature = FfmRow { label: 0, entries: vec![entry(0, 7, 1.0)] };
        assert!(matches!(p.forward(&bad_field), Err(ModelError::IdOutOfRange { .. })));
        assert!(matches!(p.forward(&bad_feature), Err(ModelError::IdOutOfRange { .. })));
        let ok = FfmRow { label: 0, entries: vec![entry(2, 6, 1.0), entry(0, 0, 1.0)] };
        assert!(p.forward(&ok).is_ok());
    }

    /// m = 2, D = 2, one CIN layer with one map, no DNN. The logit is
    /// assembled term by term from scalars.
    #[test]
    fn hand_computed_instance() {
        let cfg = ModelConfig {
            n_fields: 2,
            n_features: 2,
            embedding_dim: 2,
            cin_layer_sizes: vec![1],
            dnn_layer_sizes: vec![],
            ..Default::default()
        };
        let mut p = ModelParams::zeros(Architecture::from_config(&cfg));
        // embeddings: feature 1 -> (0.5, -1.0), feature 2 -> (2.0, 0.25)
        p.embeddings = vec![0.0, 0.0, 0.5, -1.0, 2.0, 0.25];
        p.linear_weights = vec![0.0, 0.3, -0.2];
        p.bias = 0.1;
        // W[0][i][j] for i, j in {0, 1}
        p.cin_filters = vec![vec![0.4, -0.6, 0.8, 1.5]];
        p.output_weights = vec![0.9];

        let row = FfmRow { label: 1, entries: vec![entry(0, 1, 2.0), entry(1, 2, 0.5)] };
        // X0 rows: field 0 = 2.0 * (0.5, -1.0) = (1.0, -2.0); field 1 = 0.5 * (2.0, 0.25) = (1.0, 0.125)
        let (a0, a1) = (1.0, -2.0);
        let (b0, b1) = (1.0, 0.125);
        // X1 = 0.4 X0_0*X0_0 - 0.6 X0_0*X0_1 + 0.8 X0_1*X0_0 + 1.5 X0_1*X0_1
        let x1_0 = 0.4 * a0 * a0 - 0.6 * a0 * b0 + 0.8 * b0 * a0 + 1.5 * b0 * b0;
        let x1_1 = 0.4 * a1 * a1 - 0.6 * a1 * b1 + 0.8 * b1 * a1 + 1.5 * b1 * b1;
        let linear = 0.1 + 2.0 * 0.3 + 0.5 * -0.2;
        let logit: f64 = linear + 0.9 * (x1_0 + x1_1);
        let expected = 1.0 / (1.0 + (-logit).exp());

        let t = p.forward_trace(&row).unwrap();
        assert!((t.logit - logit).abs() < 1e-12);
        assert!((p.forward(&row).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn absent_fields_get_zero_embedding_gradient() {
        let mut p = init_params(&small_cfg());
        for v in &mut p.dnn_biases[0] {
            *v = 0.3;
        }
        let row = FfmRow { label: 1, entries: vec![entry(0, 2, 1.0), entry(1, 4, 0.5)] };
        let g = p.backward(&row, 1, 1e-3).unwrap();
        let d = 3;
        for j in [0usize, 1, 3, 5, 6] {
            assert!(g.embeddings[j * d..(j + 1) * d].iter().all(|&v| v == 0.0), "row {j}");
            assert_eq!(g.linear_weights[j], 0.0);
        }
        assert!(g.embeddings[2 * d..3 * d].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn extreme_logits_stay_inside_unit_interval() {
        let mut p = ModelParams::zeros(Architecture::from_config(&small_cfg()));
        let row = FfmRow { label: 0, entries: vec![] };
        p.bias = 100.0;
        let hi = p.forward(&row).unwrap();
        p.bias = -800.0;
        let lo = p.forward(&row).unwrap();
        assert!(hi < 1.0 && lo > 0.0);
        assert!(p.loss(&row, 1, 0.0).unwrap().is_finite());
    }
}
