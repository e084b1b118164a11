//! Static, temporal-window and bidirectional recurrent gaze regressors.
//!
//! Every variant shares a per-frame backbone `F → H → D` (tanh). The head
//! emits `(θ, φ, σ_raw)` and `σ = softplus(σ_raw)`. Models trained with the
//! squared-error loss report no `σ`.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layers::{sigmoid, softplus, Dense, GruCell, GruStep};
use super::loss::LossKind;
use super::params::{ParamSet, TensorRef};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, SphericalGaze};
use crate::rng::{self, tag, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Static,
    Trn,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Static, ModelKind::Trn, ModelKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Static => "static",
            ModelKind::Trn => "trn",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub n_features: usize,
    pub hidden: usize,
    pub feature_dim: usize,
    pub state_size: usize,
    pub recurrent_layers: usize,
    /// Dropout probability at the head input.
    pub dropout_rate: f64,
    /// Frames per input window; odd.
    pub window: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            n_features: crate::simulator::N_FEATURES,
            hidden: 64,
            feature_dim: 32,
            state_size: 32,
            recurrent_layers: 2,
            dropout_rate: 0.2,
            window: 7,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_features > 0
            && self.hidden > 0
            && self.feature_dim > 0
            && self.state_size > 0
            && self.recurrent_layers > 0
            && (0.0..1.0).contains(&self.dropout_rate)
            && self.window % 2 == 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid architecture {self:?}")))
        }
    }
}

/// Centered sub-window sizes pooled by the temporal-window model.
pub fn trn_scales(window: usize) -> Vec<usize> {
    let mut s: Vec<usize> = [1, 3, 7].into_iter().filter(|&k| k <= window).collect();
    if s.last() != Some(&window) {
        s.push(window);
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiGru {
    pub fwd: GruCell,
    pub bwd: GruCell,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub loss: LossKind,
    pub arch: Architecture,
    /// `[F → H, H → D]`
    pub backbone: Vec<Dense>,
    /// Stacked bidirectional layers; empty unless `kind == Lstm`.
    pub recurrent: Vec<BiGru>,
    /// One head for static and recurrent models, one per sub-window for TRN.
    pub heads: Vec<Dense>,
}

struct LayerCache {
    fwd_steps: Vec<GruStep>,
    bwd_steps: Vec<GruStep>,
}

/// Intermediate values of one forward pass, consumed by `backward`.
pub struct ForwardCache {
    xs: Vec<Vec<f64>>,
    h1: Vec<Vec<f64>>,
    feats: Vec<Vec<f64>>,
    layers: Vec<LayerCache>,
    head_in: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<f64>>>,
    raw: Vec<[f64; 3]>,
    center: usize,
}

impl ForwardCache {
    /// Backbone features of the central frame.
    pub fn center_feature(&self) -> &[f64] {
        &self.feats[self.center]
    }
}

fn tanh_vec(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(f64::tanh).collect()
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

impl ModelParams {
    fn build(
        kind: ModelKind,
        loss: LossKind,
        arch: Architecture,
        mut dense: impl FnMut(usize, usize) -> Dense,
        mut gru: impl FnMut(usize, usize) -> GruCell,
    ) -> Result<Self> {
        arch.validate()?;
        let (f, h, d, s) = (arch.n_features, arch.hidden, arch.feature_dim, arch.state_size);
        let backbone = vec![dense(f, h), dense(h, d)];
        let mut recurrent = Vec::new();
        let heads = match kind {
            ModelKind::Static => vec![dense(d, 3)],
            ModelKind::Trn => trn_scales(arch.window).into_iter().map(|k| dense(k * d, 3)).collect(),
            ModelKind::Lstm => {
                for l in 0..arch.recurrent_layers {
                    let n_in = if l == 0 { d } else { 2 * s };
                    recurrent.push(BiGru { fwd: gru(n_in, s), bwd: gru(n_in, s) });
                }
                vec![dense(2 * s, 3)]
            }
        };
        Ok(Self { kind, loss, arch, backbone, recurrent, heads })
    }

    pub fn zeros(kind: ModelKind, loss: LossKind, arch: Architecture) -> Result<Self> {
        Self::build(kind, loss, arch, Dense::zeros, GruCell::zeros)
    }

    /// Seeded uniform initialization.
    pub fn init(kind: ModelKind, loss: LossKind, arch: Architecture, seed: u64) -> Result<Self> {
        let rng = std::cell::RefCell::new(rng::stream(seed, &[tag::INIT]));
        Self::build(
            kind,
            loss,
            arch,
            |i, o| Dense::init(i, o, &mut rng.borrow_mut()),
            |i, s| GruCell::init(i, s, &mut rng.borrow_mut()),
        )
    }

    /// Number of frames consumed by one prediction.
    pub fn input_len(&self) -> usize {
        match self.kind {
            ModelKind::Static => 1,
            _ => self.arch.window,
        }
    }

    /// Central `input_len()` frames of a longer odd window.
    pub fn select_frames<'a, 'b>(&self, window: &'b [&'a [f64]]) -> Result<&'b [&'a [f64]]> {
        let need = self.input_len();
        if window.len() < need || window.len() % 2 == 0 {
            return Err(Error::shape(format!("{need} frames"), format!("{} frames", window.len())));
        }
        let start = (window.len() - need) / 2;
        Ok(&window[start..start + need])
    }

    pub fn has_sigma(&self) -> bool {
        self.loss == LossKind::Pinball
    }

    /// Inverted-dropout masks, one per head.
    pub fn sample_dropout_masks(&self, rng: &mut Rng) -> Vec<Vec<f64>> {
        let p = self.arch.dropout_rate;
        let keep = 1.0 / (1.0 - p);
        self.heads
            .iter()
            .map(|h| (0..h.n_in).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect())
            .collect()
    }

    fn backbone_forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h1 = tanh_vec(self.backbone[0].forward(x));
        let f = tanh_vec(self.backbone[1].forward(&h1));
        (h1, f)
    }

    /// Full forward pass over exactly `input_len()` frames.
    pub fn forward(&self, frames: &[&[f64]], masks: Option<Vec<Vec<f64>>>) -> Result<(SphericalGaze, ForwardCache)> {
        let need = self.input_len();
        if frames.len() != need {
            return Err(Error::shape(format!("{need} frames"), format!("{} frames", frames.len())));
        }
        for x in frames {
            if x.len() != self.arch.n_features {
                return Err(Error::shape(format!("{} features", self.arch.n_features), format!("{} features", x.len())));
            }
        }
        let mut xs = Vec::with_capacity(need);
        let mut h1s = Vec::with_capacity(need);
        let mut feats = Vec::with_capacity(need);
        for x in frames {
            let (h1, f) = self.backbone_forward(x);
            xs.push(x.to_vec());
            h1s.push(h1);
            feats.push(f);
        }
        let center = need / 2;
        let mut layers = Vec::new();
        let head_in: Vec<Vec<f64>> = match self.kind {
            ModelKind::Static => vec![feats[0].clone()],
            ModelKind::Trn => trn_scales(self.arch.window)
                .into_iter()
                .map(|k| feats[center - k / 2..=center + k / 2].concat())
                .collect(),
            ModelKind::Lstm => {
                let mut seq = feats.clone();
                let mut last = Vec::new();
                for layer in &self.recurrent {
                    let (fo, fs) = layer.fwd.run(&seq, false);
                    let (bo, bs) = layer.bwd.run(&seq, true);
                    last = concat(&fo[need - 1], &bo[0]);
                    seq = fo.iter().zip(&bo).map(|(a, b)| concat(a, b)).collect();
                    layers.push(LayerCache { fwd_steps: fs, bwd_steps: bs });
                }
                vec![last]
            }
        };
        if let Some(m) = &masks {
            if m.len() != self.heads.len() || m.iter().zip(&head_in).any(|(m, h)| m.len() != h.len()) {
                return Err(Error::shape("one mask per head input", format!("{} masks", m.len())));
            }
        }
        let mut raw = Vec::with_capacity(self.heads.len());
        let (mut yaw, mut pitch, mut sigma) = (0.0, 0.0, 0.0);
        for (i, head) in self.heads.iter().enumerate() {
            let out = match &masks {
                Some(m) => {
                    let xin: Vec<f64> = head_in[i].iter().zip(&m[i]).map(|(a, b)| a * b).collect();
                    head.forward(&xin)
                }
                None => head.forward(&head_in[i]),
            };
            yaw += out[0];
            pitch += out[1];
            sigma += softplus(out[2]);
            raw.push([out[0], out[1], out[2]]);
        }
        let k = self.heads.len() as f64;
        let pred = SphericalGaze {
            yaw: wrap_angle(yaw / k),
            pitch: pitch / k,
            sigma: self.has_sigma().then_some(sigma / k),
        };
        let cache = ForwardCache { xs, h1: h1s, feats, layers, head_in, masks, raw, center };
        Ok((pred, cache))
    }

    /// Deterministic prediction from a window of at least `input_len()` frames.
    pub fn predict(&self, window: &[&[f64]]) -> Result<SphericalGaze> {
        Ok(self.forward(self.select_frames(window)?, None)?.0)
    }

    /// Accumulates into `grads` the gradient given `d_out = ∂L/∂(θ, φ, σ)`
    /// and, optionally, `∂L/∂f` for the central backbone feature.
    pub fn backward(&self, cache: &ForwardCache, d_out: [f64; 3], d_center_feat: Option<&[f64]>, grads: &mut ModelParams) {
        let n = cache.xs.len();
        let d = self.arch.feature_dim;
        let s = self.arch.state_size;
        let k = self.heads.len() as f64;
        let mut d_feats = vec![vec![0.0; d]; n];
        if let Some(dc) = d_center_feat {
            for (a, b) in d_feats[cache.center].iter_mut().zip(dc) {
                *a += b;
            }
        }
        let scales = trn_scales(self.arch.window);
        let mut d_last = Vec::new();
        for (i, head) in self.heads.iter().enumerate() {
            let mut dy = [d_out[0] / k, d_out[1] / k, 0.0];
            if self.has_sigma() {
                dy[2] = d_out[2] / k * sigmoid(cache.raw[i][2]);
            }
            let mut dx = match &cache.masks {
                Some(m) => {
                    let xin: Vec<f64> = cache.head_in[i].iter().zip(&m[i]).map(|(a, b)| a * b).collect();
                    let mut dx = head.backward(&xin, &dy, &mut grads.heads[i]);
                    dx.iter_mut().zip(&m[i]).for_each(|(a, b)| *a *= b);
                    dx
                }
                None => head.backward(&cache.head_in[i], &dy, &mut grads.heads[i]),
            };
            match self.kind {
                ModelKind::Static => add_into(&mut d_feats[0], &dx),
                ModelKind::Trn => {
                    let start = cache.center - scales[i] / 2;
                    for (j, chunk) in dx.chunks_exact(d).enumerate() {
                        add_into(&mut d_feats[start + j], chunk);
                    }
                }
                ModelKind::Lstm => d_last = std::mem::take(&mut dx),
            }
        }
        if self.kind == ModelKind::Lstm {
            let mut d_f = vec![vec![0.0; s]; n];
            let mut d_b = vec![vec![0.0; s]; n];
            d_f[n - 1].copy_from_slice(&d_last[..s]);
            d_b[0].copy_from_slice(&d_last[s..]);
            for l in (0..self.recurrent.len()).rev() {
                let layer = &self.recurrent[l];
                let lc = &cache.layers[l];
                let g = &mut grads.recurrent[l];
                let dxf = layer.fwd.run_backward(&lc.fwd_steps, &d_f, false, &mut g.fwd);
                let dxb = layer.bwd.run_backward(&lc.bwd_steps, &d_b, true, &mut g.bwd);
                for t in 0..n {
                    if l > 0 {
                        for j in 0..s {
                            d_f[t][j] = dxf[t][j] + dxb[t][j];
                            d_b[t][j] = dxf[t][s + j] + dxb[t][s + j];
                        }
                    } else {
                        add_into(&mut d_feats[t], &dxf[t]);
                        add_into(&mut d_feats[t], &dxb[t]);
                    }
                }
            }
        }
        for t in 0..n {
            let dz2: Vec<f64> = d_feats[t].iter().zip(&cache.feats[t]).map(|(g, f)| g * (1.0 - f * f)).collect();
            let dh1 = self.backbone[1].backward(&cache.h1[t], &dz2, &mut grads.backbone[1]);
            let dz1: Vec<f64> = dh1.iter().zip(&cache.h1[t]).map(|(g, h)| g * (1.0 - h * h)).collect();
            self.backbone[0].backward(&cache.xs[t], &dz1, &mut grads.backbone[0]);
        }
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

impl ParamSet for ModelParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (i, l) in self.backbone.iter().enumerate() {
            l.tensors(&format!("backbone.{i}"), &mut out);
        }
        for (i, l) in self.recurrent.iter().enumerate() {
            l.fwd.tensors(&format!("recurrent.{i}.fwd"), &mut out);
            l.bwd.tensors(&format!("recurrent.{i}.bwd"), &mut out);
        }
        for (i, l) in self.heads.iter().enumerate() {
            l.tensors(&format!("head.{i}"), &mut out);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.backbone {
            l.tensors_mut(&mut out);
        }
        for l in &mut self.recurrent {
            l.fwd.tensors_mut(&mut out);
            l.bwd.tensors_mut(&mut out);
        }
        for l in &mut self.heads {
            l.tensors_mut(&mut out);
        }
        out
    }
}

fn require_kind(params: &ModelParams, kind: ModelKind) -> Result<()> {
    if params.kind == kind {
        Ok(())
    } else {
        Err(Error::shape(format!("{kind} model"), format!("{} model", params.kind)))
    }
}

/// Single-frame prediction of a static model.
pub fn forward_static(params: &ModelParams, x: &[f64]) -> Result<SphericalGaze> {
    require_kind(params, ModelKind::Static)?;
    Ok(params.forward(&[x], None)?.0)
}

/// Central-frame prediction of the bidirectional recurrent model.
pub fn forward_sequence(params: &ModelParams, frames: &[&[f64]]) -> Result<SphericalGaze> {
    require_kind(params, ModelKind::Lstm)?;
    Ok(params.forward(frames, None)?.0)
}

/// Central-frame prediction of the temporal-window model.
pub fn forward_trn(params: &ModelParams, frames: &[&[f64]]) -> Result<SphericalGaze> {
    require_kind(params, ModelKind::Trn)?;
    Ok(params.forward(frames, None)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Architecture {
        Architecture { hidden: 6, feature_dim: 4, state_size: 3, ..Default::default() }
    }

    fn frames(seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::stream(seed, &[99]);
        (0..7).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn sigma_is_positive_and_output_finite() {
        for kind in ModelKind::ALL {
            let p = ModelParams::init(kind, LossKind::Pinball, small(), 1).unwrap();
            let x = frames(2);
            let g = p.predict(&refs(&x)).unwrap();
            assert!(g.sigma.unwrap() > 0.0);
            assert!(g.yaw.is_finite() && g.pitch.is_finite());
        }
    }

    #[test]
    fn zero_head_predicts_origin() {
        let mut p = ModelParams::init(ModelKind::Static, LossKind::Pinball, small(), 1).unwrap();
        p.heads[0] = Dense::zeros(4, 3);
        let g = forward_static(&p, &frames(0)[0]).unwrap();
        assert_eq!((g.yaw, g.pitch), (0.0, 0.0));
        assert_eq!(g.sigma, Some(2f64.ln()));
    }

    #[test]
    fn wrong_window_is_rejected() {
        let p = ModelParams::init(ModelKind::Lstm, LossKind::Pinball, small(), 1).unwrap();
        let x = frames(0);
        assert!(matches!(forward_sequence(&p, &refs(&x[..6])), Err(Error::ShapeMismatch { .. })));
        let s = ModelParams::init(ModelKind::Static, LossKind::Pinball, small(), 1).unwrap();
        assert!(matches!(forward_sequence(&s, &refs(&x)), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(forward_static(&s, &x[0][..5]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn mse_model_has_no_sigma() {
        let p = ModelParams::init(ModelKind::Static, LossKind::Mse, small(), 1).unwrap();
        assert_eq!(forward_static(&p, &frames(0)[0]).unwrap().sigma, None);
    }

    #[test]
    fn tied_bidirectional_model_is_reversal_invariant() {
        // Tie the two directions and make every consumer of [fwd | bwd]
        // symmetric in the two halves; reversing time then swaps the halves.
        let mut p = ModelParams::init(ModelKind::Lstm, LossKind::Pinball, small(), 5).unwrap();
        let s = p.arch.state_size;
        for l in 0..p.recurrent.len() {
            let mut cell = p.recurrent[l].fwd.clone();
            if l > 0 {
                for row in cell.w_input.chunks_exact_mut(2 * s) {
                    let (a, b) = row.split_at_mut(s);
                    b.copy_from_slice(a);
                }
            }
            p.recurrent[l] = BiGru { fwd: cell.clone(), bwd: cell };
        }
        for row in p.heads[0].weight.chunks_exact_mut(2 * s) {
            let (a, b) = row.split_at_mut(s);
            b.copy_from_slice(a);
        }
        let x = frames(8);
        let mut rev = x.clone();
        rev.reverse();
        let a = forward_sequence(&p, &refs(&x)).unwrap();
        let b = forward_sequence(&p, &refs(&rev)).unwrap();
        assert!((a.yaw - b.yaw).abs() < 1e-12);
        assert!((a.pitch - b.pitch).abs() < 1e-12);
        assert!((a.sigma.unwrap() - b.sigma.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn trn_identical_heads_match_single_window() {
        let mut p = ModelParams::init(ModelKind::Trn, LossKind::Pinball, small(), 3).unwrap();
        let d = p.arch.feature_dim;
        // Head k sees k identical frames; split the single-frame weights evenly.
        let base = p.heads[0].clone();
        for (h, &k) in p.heads.iter_mut().zip(&trn_scales(7)) {
            for o in 0..3 {
                for j in 0..k * d {
                    h.weight[o * k * d + j] = base.weight[o * d + j % d] / k as f64;
                }
            }
            h.bias = base.bias.clone();
        }
        let one = frames(1)[0].clone();
        let x = vec![one.clone(); 7];
        let g = forward_trn(&p, &refs(&x)).unwrap();
        let single = base.forward(&p.backbone_forward(&one).1);
        assert!((g.yaw - single[0]).abs() < 1e-12);
        assert!((g.pitch - single[1]).abs() < 1e-12);
        assert!((g.sigma.unwrap() - softplus(single[2])).abs() < 1e-12);
    }

    #[test]
    fn trn_sigma_is_mean_of_head_sigmas() {
        let p = ModelParams::init(ModelKind::Trn, LossKind::Pinball, small(), 4).unwrap();
        let x = frames(3);
        let (g, cache) = p.forward(&refs(&x), None).unwrap();
        let mean = cache.raw.iter().map(|r| softplus(r[2])).sum::<f64>() / cache.raw.len() as f64;
        assert!((g.sigma.unwrap() - mean).abs() < 1e-15);
    }

    #[test]
    fn trn_outer_frame_reaches_only_widest_window() {
        let p = ModelParams::init(ModelKind::Trn, LossKind::Pinball, small(), 6).unwrap();
        let x = frames(4);
        let (_, base) = p.forward(&refs(&x), None).unwrap();
        let mut y = x.clone();
        y[0][2] += 1e-3;
        let (_, pert) = p.forward(&refs(&y), None).unwrap();
        assert_eq!(base.raw[0], pert.raw[0]);
        assert_eq!(base.raw[1], pert.raw[1]);
        assert_ne!(base.raw[2], pert.raw[2]);
        let mut z = x.clone();
        z[2][2] += 1e-3;
        let (_, pert) = p.forward(&refs(&z), None).unwrap();
        assert_eq!(base.raw[0], pert.raw[0]);
        assert_ne!(base.raw[1], pert.raw[1]);
    }

    #[test]
    fn static_model_reads_central_frame_of_window() {
        let p = ModelParams::init(ModelKind::Static, LossKind::Pinball, small(), 2).unwrap();
        let x = frames(5);
        assert_eq!(p.predict(&refs(&x)).unwrap(), forward_static(&p, &x[3]).unwrap());
    }

    #[test]
    fn init_is_deterministic() {
        let a = ModelParams::init(ModelKind::Lstm, LossKind::Pinball, small(), 9).unwrap();
        let b = ModelParams::init(ModelKind::Lstm, LossKind::Pinball, small(), 9).unwrap();
        assert_eq!(a, b);
        let x = frames(1);
        assert_eq!(a.predict(&refs(&x)).unwrap(), b.predict(&refs(&x)).unwrap());
    }

    #[test]
    fn kind_parses() {
        assert_eq!("trn".parse::<ModelKind>().unwrap(), ModelKind::Trn);
        assert!("cnn".parse::<ModelKind>().is_err());
    }
}
