use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;

/// Tensor shapes derived from a config.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub n_fields: usize,
    pub n_features: usize,
    pub embedding_dim: usize,
    pub cin_layer_sizes: Vec<usize>,
    pub dnn_layer_sizes: Vec<usize>,
}

impl Architecture {
    pub fn from_config(cfg: &ModelConfig) -> Self {
        Self {
            n_fields: cfg.n_fields,
            n_features: cfg.n_features,
            embedding_dim: cfg.embedding_dim,
            cin_layer_sizes: cfg.cin_layer_sizes.clone(),
            dnn_layer_sizes: cfg.dnn_layer_sizes.clone(),
        }
    }

    /// Width of the CIN input at layer `k` (0-based): the field count for the first layer.
    pub fn cin_input(&self, k: usize) -> usize {
        if k == 0 {
            self.n_fields
        } else {
            self.cin_layer_sizes[k - 1]
        }
    }

    pub fn dnn_input(&self, l: usize) -> usize {
        if l == 0 {
            self.n_fields * self.embedding_dim
        } else {
            self.dnn_layer_sizes[l - 1]
        }
    }

    pub fn cin_pooled_len(&self) -> usize {
        self.cin_layer_sizes.iter().sum()
    }

    pub fn output_len(&self) -> usize {
        self.cin_pooled_len() + self.dnn_layer_sizes.last().copied().unwrap_or(0)
    }
}

/// All learnable tensors of the xDeepFM scorer. Also used as the gradient
/// container, with identical shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    /// `(n_features + 1) x embedding_dim`, row 0 for out-of-vocabulary ids.
    pub embeddings: Vec<f64>,
    /// `n_features + 1`.
    pub linear_weights: Vec<f64>,
    pub bias: f64,
    /// Layer `k`: `H_k x H_{k-1} x n_fields`, indexed `[h][i][j]`.
    pub cin_filters: Vec<Vec<f64>>,
    /// Layer `l`: `out x in`, row-major.
    pub dnn_weights: Vec<Vec<f64>>,
    pub dnn_biases: Vec<Vec<f64>>,
    /// Weights over `[cin pooled ; dnn top]`.
    pub output_weights: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(arch: Architecture) -> Self {
        let rows = arch.n_features + 1;
        let cin_filters = (0..arch.cin_layer_sizes.len())
            .map(|k| vec![0.0; arch.cin_layer_sizes[k] * arch.cin_input(k) * arch.n_fields])
            .collect();
        let dnn_weights = (0..arch.dnn_layer_sizes.len())
            .map(|l| vec![0.0; arch.dnn_layer_sizes[l] * arch.dnn_input(l)])
            .collect();
        let dnn_biases = arch.dnn_layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
        Self {
            embeddings: vec![0.0; rows * arch.embedding_dim],
            linear_weights: vec![0.0; rows],
            bias: 0.0,
            cin_filters,
            dnn_weights,
            dnn_biases,
            output_weights: vec![0.0; arch.output_len()],
            arch,
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(other.arch.clone())
    }

    /// Names in directory order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["embeddings".to_string(), "linear_weights".into(), "bias".into()];
        for k in 0..self.cin_filters.len() {
            names.push(format!("cin.{k}.filters"));
        }
        for l in 0..self.dnn_weights.len() {
            names.push(format!("dnn.{l}.weights"));
            names.push(format!("dnn.{l}.biases"));
        }
        names.push("output_weights".into());
        names
    }

    /// Shapes in directory order.
    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let a = &self.arch;
        let mut shapes = vec![vec![a.n_features + 1, a.embedding_dim], vec![a.n_features + 1], vec![]];
        for k in 0..a.cin_layer_sizes.len() {
            shapes.push(vec![a.cin_layer_sizes[k], a.cin_input(k), a.n_fields]);
        }
        for l in 0..a.dnn_layer_sizes.len() {
            shapes.push(vec![a.dnn_layer_sizes[l], a.dnn_input(l)]);
            shapes.push(vec![a.dnn_layer_sizes[l]]);
        }
        shapes.push(vec![a.output_len()]);
        shapes
    }

    /// Tensor data in directory order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.embeddings, &self.linear_weights, std::slice::from_ref(&self.bias)];
        out.extend(self.cin_filters.iter().map(Vec::as_slice));
        for (w, b) in self.dnn_weights.iter().zip(&self.dnn_biases) {
            out.push(w);
            out.push(b);
        }
        out.push(&self.output_weights);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            &mut self.embeddings,
            &mut self.linear_weights,
            std::slice::from_mut(&mut self.bias),
        ];
        out.extend(self.cin_filters.iter_mut().map(Vec::as_mut_slice));
        for (w, b) in self.dnn_weights.iter_mut().zip(self.dnn_biases.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.output_weights);
        out
    }

    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        self.tensor_names()
            .into_iter()
            .zip(self.tensor_shapes())
            .zip(self.slices())
            .map(|((n, s), d)| (n, s, d))
            .collect()
    }

    pub fn fill(&mut self, v: f64) {
        for s in self.slices_mut() {
            s.fill(v);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn n_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

/// Weights uniform in (-0.05, 0.05); biases zero.
pub fn init_params(cfg: &ModelConfig) -> ModelParams {
    let mut p = ModelParams::zeros(Architecture::from_config(cfg));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |xs: &mut [f64]| {
        for x in xs {
            *x = rng.random_range(-0.05..0.05);
        }
    };
    draw(&mut p.embeddings);
    draw(&mut p.linear_weights);
    for f in &mut p.cin_filters {
        draw(f);
    }
    for w in &mut p.dnn_weights {
        draw(w);
    }
    draw(&mut p.output_weights);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            n_fields: 3,
            n_features: 10,
            embedding_dim: 4,
            cin_layer_sizes: vec![5, 2],
            dnn_layer_sizes: vec![6, 3],
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(init_params(&cfg()), init_params(&cfg()));
        assert_ne!(init_params(&cfg()), init_params(&ModelConfig { seed: 12, ..cfg() }));
    }

    #[test]
    fn init_ranges() {
        let p = init_params(&cfg());
        assert_eq!(p.bias, 0.0);
        assert!(p.dnn_biases.iter().flatten().all(|&b| b == 0.0));
        for s in p.slices() {
            assert!(s.iter().all(|v| v.abs() <= 0.05));
        }
        // the OOV row is drawn like any other
        assert!(p.embeddings[..4].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn shapes_match_config() {
        let p = init_params(&cfg());
        let shapes = p.tensor_shapes();
        assert_eq!(
            shapes,
            vec![
                vec![11, 4],
                vec![11],
                vec![],
                vec![5, 3, 3],
                vec![2, 5, 3],
                vec![6, 12],
                vec![6],
                vec![3, 6],
                vec![3],
                vec![10],
            ]
        );
        for ((_, shape, data), _) in p.tensors().into_iter().zip(0..) {
            assert_eq!(shape.iter().product::<usize>(), data.len());
        }
        assert_eq!(p.tensor_names().len(), p.slices().len());
    }
}
