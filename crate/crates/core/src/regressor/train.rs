//! Seeded mini-batch training with best-validation checkpointing.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{loss_grad, LossKind};
use super::model::{Architecture, ModelKind, ModelParams};
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::geometry::{spherical_error, SphericalGaze};
use crate::rng::{self, tag};
use crate::simulator::{DatasetSplit, Split};

/// Samples per parallel work unit. Fixed so the reduction order does not
/// depend on the thread count.
pub(crate) const CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            epochs: 20,
            seed: 0,
            loss_kind: LossKind::Pinball,
            window: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.adam_beta1)
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_eps > 0.0
            && self.batch_size > 0
            && self.window % 2 == 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// `None` for the pre-training evaluation.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub val_error_deg: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
}

/// Loss of one window; adds `∂L/∂params` into `grads` when given.
pub(crate) fn sample_loss(
    params: &ModelParams,
    frames: &[&[f64]],
    gt: &SphericalGaze,
    masks: Option<Vec<Vec<f64>>>,
    grads: Option<&mut ModelParams>,
) -> Result<f64> {
    let (pred, cache) = params.forward(params.select_frames(frames)?, masks)?;
    let (loss, d) = loss_grad(params.loss, &pred, gt);
    if let Some(g) = grads {
        params.backward(&cache, d, None, g);
    }
    Ok(loss)
}

/// Mean loss and gradient over `batch` (indices into `split`).
pub fn batch_gradient(
    params: &ModelParams,
    split: &Split,
    batch: &[usize],
    dropout_seed: Option<u64>,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let parts: Vec<Result<(f64, ModelParams)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = params.zeros_like();
            let mut total = 0.0;
            for &i in chunk {
                let masks = dropout_seed.map(|s| params.sample_dropout_masks(&mut rng::stream(s, &[i as u64])));
                let gt = split.center(i).gt_gaze;
                total += sample_loss(params, &split.window_features(i), &gt, masks, Some(&mut g))?;
            }
            Ok((total, g))
        })
        .collect();
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    for p in parts {
        let (l, g) = p?;
        loss += l;
        grads.add_scaled(&g, 1.0);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, grads))
}

/// Deterministic predictions for every window of `split`.
pub fn predict_split(params: &ModelParams, split: &Split) -> Result<Vec<SphericalGaze>> {
    (0..split.len()).into_par_iter().map(|i| params.predict(&split.window_features(i))).collect()
}

/// Mean angular error in degrees.
pub fn mean_angular_error(preds: &[SphericalGaze], gts: &[SphericalGaze]) -> f64 {
    let n = preds.len().min(gts.len());
    if n == 0 {
        return 0.0;
    }
    preds.iter().zip(gts).map(|(p, g)| spherical_error(*p, *g)).sum::<f64>() / n as f64
}

/// Mean loss and mean angular error of `params` on `split`.
pub fn evaluate_split(params: &ModelParams, split: &Split) -> Result<(f64, f64)> {
    let preds = predict_split(params, split)?;
    let gts = split.targets();
    let loss = preds
        .iter()
        .zip(&gts)
        .map(|(p, g)| loss_grad(params.loss, p, g).0)
        .sum::<f64>()
        / gts.len().max(1) as f64;
    Ok((loss, mean_angular_error(&preds, &gts)))
}

/// Trains from a seeded initialization and keeps the parameters with the
/// lowest validation loss.
///
/// Dropout is active during training only for squared-error models, whose
/// uncertainty comes from dropout sampling.
pub fn train(data: &DatasetSplit, cfg: &TrainConfig, kind: ModelKind, arch: Architecture) -> Result<TrainOutput> {
    cfg.validate()?;
    if arch.window != cfg.window {
        return Err(Error::Config(format!("architecture window {} != training window {}", arch.window, cfg.window)));
    }
    let params = ModelParams::init(kind, cfg.loss_kind, arch, cfg.seed)?;
    train_from(params, data, cfg)
}

/// Continues training existing parameters.
pub fn train_from(mut params: ModelParams, data: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let adam = cfg.adam();
    let mut state = AdamState::new(&params);
    let use_dropout = params.loss == LossKind::Mse && params.arch.dropout_rate > 0.0;
    let (val_loss, val_err) = evaluate_split(&params, &data.val)?;
    let mut history = vec![EpochMetrics { epoch: 0, train_loss: None, val_loss, val_error_deg: val_err }];
    let mut best = (val_loss, 0, params.clone());
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, &[tag::SHUFFLE, epoch as u64]));
        let mut total = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let dseed = use_dropout.then(|| rng::derive_seed(cfg.seed, &[tag::DROPOUT, epoch as u64, step as u64]));
            let (loss, grads) = batch_gradient(&params, &data.train, batch, dseed)?;
            total += loss * batch.len() as f64;
            adam_step(&mut params, &grads, &mut state, &adam)?;
        }
        let (val_loss, val_err) = evaluate_split(&params, &data.val)?;
        history.push(EpochMetrics {
            epoch,
            train_loss: Some(total / order.len() as f64),
            val_loss,
            val_error_deg: val_err,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
        }
    }
    Ok(TrainOutput { params: best.2, history, best_epoch: best.1 })
}
