//! Unsupervised adaptation to an unlabeled target domain.
//!
//! The objective is `α·L_τ + L_D + β·L_S`: the quantile loss on labeled
//! source windows, a domain discriminator on central backbone features, and
//! a left-right consistency loss on target windows. The discriminator is
//! trained to separate the domains while a gradient-reversal coupling pushes
//! the backbone the other way.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mirror_gaze, SphericalGaze};
use crate::regressor::{
    adam_step, evaluate_split, loss_grad, pinball_loss, pinball_loss_grad, AdamConfig, AdamState, Dense, ModelParams,
    ParamSet, TensorRef, CHUNK,
};
use crate::rng::{self, tag};
use crate::simulator::{mirror_features, DatasetSplit, Split};

pub const DISC_HIDDEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    /// Weight of the supervised quantile loss.
    pub alpha: f64,
    /// Weight of the symmetry loss.
    pub beta: f64,
    pub disc_lr: f64,
    /// Multiplier on the reversed discriminator gradient reaching the backbone.
    pub grad_reversal_scale: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Regressor learning rate during adaptation.
    pub lr: f64,
    /// Windows per domain per step.
    pub batch_size: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            alpha: 60.0,
            beta: 3.0,
            disc_lr: 1e-3,
            grad_reversal_scale: 1.0,
            epochs: 5,
            seed: 0,
            lr: 1e-4,
            batch_size: 64,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.beta > 0.0
            && self.disc_lr > 0.0
            && self.lr > 0.0
            && self.grad_reversal_scale >= 0.0
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid adaptation configuration {self:?}")))
        }
    }
}

/// `D → 16 → 1`, tanh hidden layer, sigmoid output.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorParams {
    pub hidden: Dense,
    pub out: Dense,
}

impl DiscriminatorParams {
    pub fn init(feature_dim: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, &[tag::ADAPT, 0]);
        let hidden = Dense::init(feature_dim, DISC_HIDDEN, &mut rng);
        let out = Dense::init(DISC_HIDDEN, 1, &mut rng);
        Self { hidden, out }
    }

    fn logit(&self, f: &[f64]) -> (f64, Vec<f64>) {
        let h: Vec<f64> = self.hidden.forward(f).into_iter().map(f64::tanh).collect();
        (self.out.forward(&h)[0], h)
    }

    /// Probability that `f` comes from the source domain.
    pub fn prob_source(&self, f: &[f64]) -> f64 {
        sigmoid(self.logit(f).0)
    }

    /// Cross-entropy of one feature vector against its domain label, scaled
    /// by `w`. Adds parameter gradients into `grad` and returns the loss and
    /// `∂(w·BCE)/∂f`.
    fn bce_backward(&self, f: &[f64], source: bool, w: f64, grad: &mut DiscriminatorParams) -> (f64, Vec<f64>) {
        let (z, h) = self.logit(f);
        let y = if source { 1.0 } else { 0.0 };
        let loss = if source { softplus(-z) } else { softplus(z) };
        let dz = w * (sigmoid(z) - y);
        let dh = self.out.backward(&h, &[dz], &mut grad.out);
        let da: Vec<f64> = dh.iter().zip(&h).map(|(g, h)| g * (1.0 - h * h)).collect();
        let df = self.hidden.backward(f, &da, &mut grad.hidden);
        (w * loss, df)
    }
}

impl ParamSet for DiscriminatorParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        self.hidden.tensors("disc.0", &mut out);
        self.out.tensors("disc.1", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        self.hidden.tensors_mut(&mut out);
        self.out.tensors_mut(&mut out);
        out
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Mean binary cross-entropy, source labeled 1 and target 0.
pub fn discriminator_loss(disc: &DiscriminatorParams, feats_src: &[Vec<f64>], feats_tgt: &[Vec<f64>]) -> Result<f64> {
    if feats_src.is_empty() || feats_tgt.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let s: f64 = feats_src.iter().map(|f| softplus(-disc.logit(f).0)).sum();
    let t: f64 = feats_tgt.iter().map(|f| softplus(disc.logit(f).0)).sum();
    Ok((s + t) / (feats_src.len() + feats_tgt.len()) as f64)
}

/// Feature-space horizontal flip of a window.
pub fn mirror_window(frames: &[&[f64]]) -> Vec<Vec<f64>> {
    frames.iter().map(|x| mirror_features(x)).collect()
}

/// Quantile loss between the prediction for `frames` and the mirrored
/// prediction for `mirrored`, the latter acting as ground truth.
pub fn symmetry_loss(params: &ModelParams, frames: &[&[f64]], mirrored: &[&[f64]]) -> Result<f64> {
    if frames.len() != mirrored.len() {
        return Err(Error::shape(format!("{} frames", frames.len()), format!("{} frames", mirrored.len())));
    }
    let pred = params.predict(frames)?;
    let target = symmetry_target(params, mirrored)?;
    Ok(pinball_loss(&pred, &target))
}

fn symmetry_target(params: &ModelParams, mirrored: &[&[f64]]) -> Result<SphericalGaze> {
    let m = mirror_gaze(params.predict(mirrored)?);
    Ok(SphericalGaze::new(m.yaw, m.pitch))
}

/// Central backbone features of every window in `split`.
pub fn center_features(params: &ModelParams, split: &Split) -> Result<Vec<Vec<f64>>> {
    (0..split.len())
        .into_par_iter()
        .map(|i| {
            let w = split.window_features(i);
            let (_, cache) = params.forward(params.select_frames(&w)?, None)?;
            Ok(cache.center_feature().to_vec())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptEpoch {
    pub epoch: usize,
    pub total_loss: f64,
    pub quantile_loss: f64,
    pub disc_loss: f64,
    pub symmetry_loss: f64,
    pub val_error_deg: f64,
}

#[derive(Clone, Debug)]
pub struct AdaptOutput {
    pub params: ModelParams,
    pub disc: DiscriminatorParams,
    pub history: Vec<AdaptEpoch>,
}

#[derive(Default)]
struct StepLosses {
    quantile: f64,
    disc: f64,
    symmetry: f64,
}

struct StepGrads {
    model: ModelParams,
    disc: DiscriminatorParams,
    losses: StepLosses,
}

impl StepGrads {
    fn zeros(params: &ModelParams, disc: &DiscriminatorParams) -> Self {
        Self { model: params.zeros_like(), disc: disc.zeros_like(), losses: StepLosses::default() }
    }

    fn absorb(&mut self, o: StepGrads) {
        self.model.add_scaled(&o.model, 1.0);
        self.disc.add_scaled(&o.disc, 1.0);
        self.losses.quantile += o.losses.quantile;
        self.losses.disc += o.losses.disc;
        self.losses.symmetry += o.losses.symmetry;
    }
}

/// One labeled or unlabeled window in a mixed batch.
#[derive(Clone, Copy)]
enum Item {
    Source(usize),
    Target(usize),
}

#[allow(clippy::too_many_arguments)]
fn item_grads(
    params: &ModelParams,
    disc: &DiscriminatorParams,
    src: &Split,
    tgt: &Split,
    item: Item,
    n_src: f64,
    n_tgt: f64,
    cfg: &AdaptConfig,
    g: &mut StepGrads,
) -> Result<()> {
    let n_all = n_src + n_tgt;
    match item {
        Item::Source(i) => {
            let w = src.window_features(i);
            let (pred, cache) = params.forward(params.select_frames(&w)?, None)?;
            let (lq, mut d) = loss_grad(params.loss, &pred, &src.center(i).gt_gaze);
            d.iter_mut().for_each(|v| *v *= cfg.alpha / n_src);
            let (ld, df) = disc.bce_backward(cache.center_feature(), true, 1.0 / n_all, &mut g.disc);
            let rev: Vec<f64> = df.iter().map(|v| -cfg.grad_reversal_scale * v).collect();
            params.backward(&cache, d, Some(&rev), &mut g.model);
            g.losses.quantile += cfg.alpha * lq / n_src;
            g.losses.disc += ld;
        }
        Item::Target(j) => {
            let w = tgt.window_features(j);
            let frames = params.select_frames(&w)?;
            let mirrored = mirror_window(frames);
            let mref: Vec<&[f64]> = mirrored.iter().map(Vec::as_slice).collect();
            let target = symmetry_target(params, &mref)?;
            let (pred, cache) = params.forward(frames, None)?;
            let (ls, mut d) = pinball_loss_grad(&pred, &target);
            if !params.has_sigma() {
                d[2] = 0.0;
            }
            d.iter_mut().for_each(|v| *v *= cfg.beta / n_tgt);
            let (ld, df) = disc.bce_backward(cache.center_feature(), false, 1.0 / n_all, &mut g.disc);
            let rev: Vec<f64> = df.iter().map(|v| -cfg.grad_reversal_scale * v).collect();
            params.backward(&cache, d, Some(&rev), &mut g.model);
            g.losses.symmetry += cfg.beta * ls / n_tgt;
            g.losses.disc += ld;
        }
    }
    Ok(())
}

fn step_grads(
    params: &ModelParams,
    disc: &DiscriminatorParams,
    src: &Split,
    tgt: &Split,
    items: &[Item],
    cfg: &AdaptConfig,
) -> Result<StepGrads> {
    let n_src = items.iter().filter(|i| matches!(i, Item::Source(_))).count().max(1) as f64;
    let n_tgt = items.iter().filter(|i| matches!(i, Item::Target(_))).count().max(1) as f64;
    let parts: Vec<Result<StepGrads>> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = StepGrads::zeros(params, disc);
            for &item in chunk {
                item_grads(params, disc, src, tgt, item, n_src, n_tgt, cfg, &mut g)?;
            }
            Ok(g)
        })
        .collect();
    let mut total = StepGrads::zeros(params, disc);
    for p in parts {
        total.absorb(p?);
    }
    Ok(total)
}

/// Fine-tunes `params` on labeled source windows and unlabeled target
/// windows. Source validation error is tracked per epoch.
pub fn adapt_train(
    params: &ModelParams,
    labeled_src: &DatasetSplit,
    unlabeled_tgt: &Split,
    cfg: &AdaptConfig,
) -> Result<AdaptOutput> {
    cfg.validate()?;
    if labeled_src.train.is_empty() || unlabeled_tgt.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut params = params.clone();
    let mut disc = DiscriminatorParams::init(params.arch.feature_dim, cfg.seed);
    let model_adam = AdamConfig { lr: cfg.lr, ..Default::default() };
    let disc_adam = AdamConfig { lr: cfg.disc_lr, ..Default::default() };
    let mut model_state = AdamState::new(&params);
    let mut disc_state = AdamState::new(&disc);
    let src = &labeled_src.train;
    let mut history = Vec::new();
    let mut src_order: Vec<usize> = (0..src.len()).collect();
    let mut tgt_order: Vec<usize> = (0..unlabeled_tgt.len()).collect();
    for epoch in 1..=cfg.epochs {
        src_order.shuffle(&mut rng::stream(cfg.seed, &[tag::ADAPT, 1, epoch as u64]));
        tgt_order.shuffle(&mut rng::stream(cfg.seed, &[tag::ADAPT, 2, epoch as u64]));
        let mut sums = StepLosses::default();
        let mut steps = 0usize;
        for (k, sb) in src_order.chunks(cfg.batch_size).enumerate() {
            let items: Vec<Item> = sb
                .iter()
                .map(|&i| Item::Source(i))
                .chain((0..cfg.batch_size).map(|j| Item::Target(tgt_order[(k * cfg.batch_size + j) % tgt_order.len()])))
                .collect();
            let g = step_grads(&params, &disc, src, unlabeled_tgt, &items, cfg)?;
            adam_step(&mut params, &g.model, &mut model_state, &model_adam)?;
            adam_step(&mut disc, &g.disc, &mut disc_state, &disc_adam)?;
            sums.quantile += g.losses.quantile;
            sums.disc += g.losses.disc;
            sums.symmetry += g.losses.symmetry;
            steps += 1;
        }
        let n = steps.max(1) as f64;
        let val_error_deg =
            if labeled_src.val.is_empty() { f64::NAN } else { evaluate_split(&params, &labeled_src.val)?.1 };
        history.push(AdaptEpoch {
            epoch,
            total_loss: (sums.quantile + sums.disc + sums.symmetry) / n,
            quantile_loss: sums.quantile / n,
            disc_loss: sums.disc / n,
            symmetry_loss: sums.symmetry / n,
            val_error_deg,
        });
    }
    Ok(AdaptOutput { params, disc, history })
}
