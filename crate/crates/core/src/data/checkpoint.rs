use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::data::{read_json, write_json};
use crate::error::{Error, Result};
use crate::models::{Model, ModelKind};
use crate::training::TrainConfig;

pub const CHECKPOINT_FORMAT: &str = "stpgsr-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointParam {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major values.
    pub values: Vec<f64>,
}

/// On-disk model: architecture, sizes, init seed, training config and every
/// parameter by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub n_s: usize,
    pub n_t: usize,
    pub seed: u64,
    pub config: Option<TrainConfig>,
    pub params: Vec<CheckpointParam>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, config: Option<&TrainConfig>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            kind: model.kind,
            n_s: model.n_s,
            n_t: model.n_t,
            seed: model.seed,
            config: config.cloned(),
            params: model
                .params
                .iter()
                .map(|p| CheckpointParam {
                    name: p.name.clone(),
                    shape: p.tensor.shape().to_vec(),
                    values: p.tensor.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds the architecture and overwrites every parameter by name.
    pub fn to_model(&self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                self.format, self.version
            )));
        }
        let mut model = Model::new(self.kind, self.n_s, self.n_t, self.seed)?;
        if self.params.len() != model.params.len() {
            return Err(Error::Validation(format!(
                "checkpoint holds {} parameters, a {} {} -> {} model has {}",
                self.params.len(),
                self.kind,
                self.n_s,
                self.n_t,
                model.params.len()
            )));
        }
        for cp in &self.params {
            let id = model
                .params
                .find(&cp.name)
                .ok_or_else(|| Error::Validation(format!("unknown parameter {:?} in checkpoint", cp.name)))?;
            let slot = model.params.get_mut(id);
            if cp.shape != slot.tensor.shape() {
                return Err(Error::Validation(format!(
                    "parameter {} has shape {:?}, but a {} -> {} model expects {:?}",
                    cp.name,
                    cp.shape,
                    self.n_s,
                    self.n_t,
                    slot.tensor.shape()
                )));
            }
            slot.tensor = Tensor::new(cp.shape.clone(), cp.values.clone())
                .map_err(|e| Error::Validation(format!("parameter {}: {e}", cp.name)))?;
        }
        Ok(model)
    }
}

pub fn write_checkpoint(model: &Model, config: Option<&TrainConfig>, path: &Path) -> Result<()> {
    write_json(&Checkpoint::from_model(model, config), path)
}

pub fn read_checkpoint(path: &Path) -> Result<(Model, Checkpoint)> {
    let cp: Checkpoint = read_json(path)?;
    let model = cp
        .to_model()
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    Ok((model, cp))
}
