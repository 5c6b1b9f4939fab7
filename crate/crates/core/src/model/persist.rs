use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Architecture, ModelConfig, ModelError, ModelParams};
use crate::container::{self, Container, ContainerError};

pub const MODEL_KIND: &str = "xdeepfm";

/// Points a saved model at the vocabulary its ids were assigned by.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabRef {
    pub path: String,
    pub n_fields: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub params: ModelParams,
    pub config: ModelConfig,
    pub vocab_ref: VocabRef,
    /// CRC32 of the file contents, usable as a version tag.
    pub checksum: u32,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: ModelConfig,
    vocab_ref: VocabRef,
}

pub fn save_model(
    params: &ModelParams,
    cfg: &ModelConfig,
    vocab_ref: &VocabRef,
    path: impl AsRef<Path>,
) -> Result<(), ModelError> {
    if Architecture::from_config(cfg) != params.arch {
        return Err(ModelError::InvalidConfig("parameters do not match the config shapes".into()));
    }
    let mut c = Container::new(MODEL_KIND, json!({ "config": cfg, "vocab_ref": vocab_ref }));
    for (name, shape, data) in params.tensors() {
        c.push(&name, shape, data);
    }
    container::write_file(&c, path)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel, ModelError> {
    let mut c = container::read_file(path)?;
    c.expect_kind(MODEL_KIND)?;
    let meta: Meta =
        serde_json::from_value(c.meta.clone()).map_err(|e| ContainerError::Header(e.to_string()))?;
    meta.config.validate()?;
    let mut params = ModelParams::zeros(Architecture::from_config(&meta.config));
    let names = params.tensor_names();
    let shapes = params.tensor_shapes();
    for ((name, shape), slot) in names.iter().zip(&shapes).zip(params.slices_mut()) {
        slot.copy_from_slice(&c.take(name, shape)?);
    }
    if let Some((extra, _)) = c.tensors.first() {
        return Err(ContainerError::Header(format!("unexpected tensor {:?}", extra.name)).into());
    }
    Ok(LoadedModel { params, config: meta.config, vocab_ref: meta.vocab_ref, checksum: c.checksum })
}
