//! JSON model checkpoints.
//!
//! ```text
//! {
//!   "format": "gazekit-model",
//!   "version": 1,
//!   "kind": "static" | "trn" | "lstm",
//!   "loss": "pinball" | "mse",
//!   "arch": { ...Architecture... },
//!   "train_config": { ...TrainConfig... },
//!   "tensors": [ { "name": "backbone.0.weight", "shape": [64, 8], "values": [...] }, ... ]
//! }
//! ```
//!
//! Values are row-major. Tensor names follow `backbone.{i}.{weight,bias}`,
//! `recurrent.{layer}.{fwd,bwd}.{w_input,w_hidden,bias}` and
//! `head.{i}.{weight,bias}`; gate blocks of recurrent tensors are stacked
//! in the order update, reset, candidate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::model::{Architecture, ModelKind, ModelParams};
use super::params::ParamSet;
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const FORMAT: &str = "gazekit-model";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub loss: LossKind,
    pub arch: Architecture,
    pub train_config: TrainConfig,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, train_config: &TrainConfig) -> Self {
        let tensors = params
            .tensors()
            .into_iter()
            .map(|t| TensorRecord { name: t.name, shape: t.shape, values: t.data.to_vec() })
            .collect();
        Self {
            format: FORMAT.into(),
            version: VERSION,
            kind: params.kind,
            loss: params.loss,
            arch: params.arch,
            train_config: *train_config,
            tensors,
        }
    }

    pub fn into_params(self) -> Result<(ModelParams, TrainConfig)> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Config(format!("unsupported checkpoint {} v{}", self.format, self.version)));
        }
        let mut params = ModelParams::zeros(self.kind, self.loss, self.arch)?;
        let expected: Vec<(String, Vec<usize>)> =
            params.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::shape(format!("{} tensors", expected.len()), format!("{} tensors", self.tensors.len())));
        }
        for ((dst, (name, shape)), rec) in params.tensors_mut().into_iter().zip(&expected).zip(&self.tensors) {
            if &rec.name != name || &rec.shape != shape || rec.values.len() != dst.len() {
                return Err(Error::shape(
                    format!("{name} {shape:?}"),
                    format!("{} {:?} with {} values", rec.name, rec.shape, rec.values.len()),
                ));
            }
            dst.copy_from_slice(&rec.values);
        }
        if !params.is_finite() {
            return Err(Error::Config("checkpoint contains non-finite weights".into()));
        }
        Ok((params, self.train_config))
    }
}

pub fn save_checkpoint(path: &Path, params: &ModelParams, train_config: &TrainConfig) -> Result<()> {
    let text = serde_json::to_string(&Checkpoint::new(params, train_config))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, TrainConfig)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    ck.into_params()
}
