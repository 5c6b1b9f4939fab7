//! The xDeepFM scorer: field embeddings, a compressed interaction network,
//! a relu network on the flattened embeddings and a linear term, with exact
//! gradients, minibatch training and file persistence.

mod config;
mod gradcheck;
mod network;
mod optim;
mod params;
mod persist;
mod train;

pub use config::{Activation, ModelConfig, OptimizerKind};
pub use gradcheck::{gradient_check, GradCheckReport, TensorCheck};
pub use network::Trace;
pub use optim::Optimizer;
pub use params::{init_params, Architecture, ModelParams};
pub use persist::{load_model, save_model, LoadedModel, VocabRef, MODEL_KIND};
pub use train::{predict_batch, train, EpochStats, TrainReport};

use thiserror::Error;

use crate::container::ContainerError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("entry {field}:{feature} out of range (fields < {n_fields}, features <= {n_features})")]
    IdOutOfRange { field: u32, feature: u32, n_fields: usize, n_features: usize },
    #[error("row {index}: {error}")]
    Row {
        index: usize,
        error: Box<ModelError>,
    },
    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Diverged { epoch: usize, batch: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error(transparent)]
    Container(#[from] ContainerError),
}

impl ModelError {
    pub(crate) fn at_row(self, index: usize) -> Self {
        Self::Row { index, error: Box::new(self) }
    }
}
