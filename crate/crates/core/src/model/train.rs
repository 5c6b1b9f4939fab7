use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{init_params, ModelConfig, ModelError, ModelParams, Optimizer};
use crate::ffm::FfmRow;
use crate::metrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_logloss: f64,
    pub val_logloss: Option<f64>,
    /// `None` when the validation set is empty or single-class.
    pub val_auc: Option<f64>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

impl TrainReport {
    /// Copy with timings zeroed, for run-to-run comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for e in &mut r.epochs {
            e.wall_time_secs = 0.0;
        }
        r
    }
}

pub fn predict_batch(params: &ModelParams, rows: &[FfmRow]) -> Result<Vec<f64>, ModelError> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| params.forward(r).map_err(|e| e.at_row(i)))
        .collect()
}

fn labels(rows: &[FfmRow]) -> Vec<u8> {
    rows.iter().map(|r| r.label).collect()
}

/// Minibatch training with a fresh seeded shuffle each epoch. Returns the
/// parameters of the epoch with the lowest validation logloss, or the lowest
/// training logloss when `val_rows` is empty.
pub fn train(
    cfg: &ModelConfig,
    train_rows: &[FfmRow],
    val_rows: &[FfmRow],
) -> Result<(ModelParams, TrainReport), ModelError> {
    cfg.validate()?;
    if train_rows.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut params = init_params(cfg);
    for (i, r) in train_rows.iter().chain(val_rows).enumerate() {
        params.check_row(r).map_err(|e| e.at_row(i))?;
    }

    let mut report = TrainReport::default();
    if cfg.epochs == 0 {
        return Ok((params, report));
    }
    let mut optimizer = Optimizer::new(cfg, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_rows.len()).collect();
    let mut grads = ModelParams::zeros_like(&params);
    let train_labels = labels(train_rows);
    let val_labels = labels(val_rows);
    let mut best: Option<(f64, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            grads.fill(0.0);
            let scale = 1.0 / idx.len() as f64;
            for &i in idx {
                let row = &train_rows[i];
                let trace = params.forward_trace(row)?;
                if !trace.logit.is_finite() {
                    return Err(ModelError::Diverged { epoch, batch });
                }
                params.accumulate_gradients(row, row.label, &trace, cfg.l2, scale, &mut grads);
            }
            optimizer.step(&mut params, &grads);
            if !params.is_finite() {
                return Err(ModelError::Diverged { epoch, batch });
            }
        }

        let train_pred = predict_batch(&params, train_rows)?;
        let train_logloss = metrics::logloss(&train_pred, &train_labels).expect("non-empty, equal lengths");
        let (val_logloss, val_auc) = if val_rows.is_empty() {
            (None, None)
        } else {
            let p = predict_batch(&params, val_rows)?;
            (metrics::logloss(&p, &val_labels).ok(), metrics::auc(&p, &val_labels).ok())
        };
        if !train_logloss.is_finite() {
            return Err(ModelError::Diverged { epoch, batch: order.len().div_ceil(cfg.batch_size) });
        }
        let wall_time_secs = started.elapsed().as_secs_f64();
        log::info!(
            "epoch {epoch}: train logloss {train_logloss:.5}, val logloss {val_logloss:?}, val auc {val_auc:?} ({wall_time_secs:.2}s)"
        );
        let score = val_logloss.unwrap_or(train_logloss);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, params.clone()));
            report.best_epoch = Some(epoch);
        }
        report.epochs.push(EpochStats { epoch, train_logloss, val_logloss, val_auc, wall_time_secs });
    }
    let (_, best_params) = best.expect("at least one epoch ran");
    Ok((best_params, report))
}
