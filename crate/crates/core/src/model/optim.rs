use super::{ModelConfig, ModelParams, OptimizerKind};

/// First-order optimizer state over a full parameter set.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64, t: i32, m: ModelParams, v: ModelParams },
}

impl Optimizer {
    pub fn new(cfg: &ModelConfig, like: &ModelParams) -> Self {
        match cfg.optimizer {
            OptimizerKind::Sgd => Self::Sgd { lr: cfg.learning_rate },
            OptimizerKind::Adam => Self::Adam {
                lr: cfg.learning_rate,
                beta1: cfg.adam_beta1,
                beta2: cfg.adam_beta2,
                eps: cfg.adam_epsilon,
                t: 0,
                m: ModelParams::zeros_like(like),
                v: ModelParams::zeros_like(like),
            },
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        match self {
            Self::Sgd { lr } => {
                for (p, g) in params.slices_mut().into_iter().zip(grads.slices()) {
                    for (pv, gv) in p.iter_mut().zip(g) {
                        *pv -= *lr * gv;
                    }
                }
            }
            Self::Adam { lr, beta1, beta2, eps, t, m, v } => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                let tensors = params.slices_mut().into_iter().zip(grads.slices()).zip(m.slices_mut()).zip(v.slices_mut());
                for (((p, g), m), v) in tensors {
                    for i in 0..p.len() {
                        m[i] = *beta1 * m[i] + (1.0 - *beta1) * g[i];
                        v[i] = *beta2 * v[i] + (1.0 - *beta2) * g[i] * g[i];
                        p[i] -= *lr * (m[i] / c1) / ((v[i] / c2).sqrt() + *eps);
                    }
                }
            }
        }
    }
}
