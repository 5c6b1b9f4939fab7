use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{check_all, check_ids, BaselineError};
use crate::container::{Container, ContainerError};
use crate::ffm::FfmRow;
use crate::util::{open_unit, sigmoid};

pub const LR_KIND: &str = "lr";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, epochs: 20, l2: 1e-6, batch_size: 32, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    /// Indexed by feature id, `n_features + 1` entries.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: LrConfig,
}

impl LrModel {
    pub fn zeros(n_features: usize, config: LrConfig) -> Self {
        Self { weights: vec![0.0; n_features + 1], bias: 0.0, config }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn logit(&self, row: &FfmRow) -> f64 {
        self.bias + row.entries.iter().map(|e| e.value * self.weights[e.feature as usize]).sum::<f64>()
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(LR_KIND, json!({ "config": self.config }));
        c.push("weights", vec![self.weights.len()], &self.weights);
        c.push("bias", vec![], &[self.bias]);
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self, BaselineError> {
        c.expect_kind(LR_KIND)?;
        let config: LrConfig = serde_json::from_value(c.meta["config"].clone())
            .map_err(|e| ContainerError::Header(e.to_string()))?;
        let n = c.tensors.first().map(|(e, _)| e.shape.clone()).unwrap_or_default();
        if n.len() != 1 || n[0] == 0 {
            return Err(ContainerError::Header("weights must be a non-empty vector".into()).into());
        }
        let weights = c.take("weights", &n)?;
        let bias = c.take("bias", &[])?[0];
        Ok(Self { weights, bias, config })
    }
}

/// Minibatch gradient descent on mean logloss plus `l2/2 * |w|^2` (bias
/// unpenalized), with a seeded shuffle each epoch.
pub fn lr_train(rows: &[FfmRow], n_features: usize, config: &LrConfig) -> Result<LrModel, BaselineError> {
    if rows.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) || config.batch_size == 0 || config.l2 < 0.0 {
        return Err(BaselineError::InvalidConfig(
            "learning_rate must be positive, batch_size at least 1, l2 non-negative".into(),
        ));
    }
    check_all(rows, n_features)?;
    let mut model = LrModel::zeros(n_features, config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut grad = vec![0.0; n_features + 1];
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.fill(0.0);
            let mut grad_bias = 0.0;
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let row = &rows[i];
                let g = (sigmoid(model.logit(row)) - row.label as f64) * scale;
                grad_bias += g;
                for e in &row.entries {
                    grad[e.feature as usize] += g * e.value;
                }
            }
            let lr = config.learning_rate;
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= lr * (g + config.l2 * *w);
            }
            model.bias -= lr * grad_bias;
        }
        if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(BaselineError::Diverged(epoch));
        }
    }
    Ok(model)
}

pub fn lr_predict(model: &LrModel, row: &FfmRow) -> Result<f64, BaselineError> {
    check_ids(row, model.n_features())?;
    Ok(open_unit(sigmoid(model.logit(row))))
}
