//! Quantile (pinball) and squared-error losses with their gradients.
//!
//! Gradients are with respect to the prediction `(θ, φ, σ)`. Yaw residuals
//! are wrapped to (−π, π] so a prediction just across the ±π seam is close.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, SphericalGaze};

pub const TAU_LOW: f64 = 0.1;
pub const TAU_HIGH: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Pinball,
    Mse,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Pinball => "pinball",
            LossKind::Mse => "mse",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pinball" => Ok(LossKind::Pinball),
            "mse" => Ok(LossKind::Mse),
            _ => Err(Error::Config(format!("unknown loss {s:?}"))),
        }
    }
}

/// `max(τq, −(1−τ)q)`.
pub fn pinball_term(q: f64, tau: f64) -> f64 {
    (tau * q).max(-(1.0 - tau) * q)
}

/// Right-continuous subgradient of `pinball_term` in `q`.
fn pinball_slope(q: f64, tau: f64) -> f64 {
    if q >= 0.0 {
        tau
    } else {
        tau - 1.0
    }
}

fn residuals(pred: &SphericalGaze, gt: &SphericalGaze) -> [f64; 2] {
    [wrap_angle(gt.yaw - pred.yaw), gt.pitch - pred.pitch]
}

/// The four quantile residuals `q̂` in the order
/// (θ, τ=0.1), (θ, τ=0.9), (φ, τ=0.1), (φ, τ=0.9).
pub fn pinball_residuals(pred: &SphericalGaze, gt: &SphericalGaze) -> [f64; 4] {
    let s = pred.sigma.unwrap_or(0.0);
    let [ey, ep] = residuals(pred, gt);
    [ey + s, ey - s, ep + s, ep - s]
}

pub fn pinball_loss(pred: &SphericalGaze, gt: &SphericalGaze) -> f64 {
    pinball_loss_grad(pred, gt).0
}

/// Loss and `∂L/∂(θ, φ, σ)`.
pub fn pinball_loss_grad(pred: &SphericalGaze, gt: &SphericalGaze) -> (f64, [f64; 3]) {
    let q = pinball_residuals(pred, gt);
    let taus = [TAU_LOW, TAU_HIGH, TAU_LOW, TAU_HIGH];
    let loss = q.iter().zip(&taus).map(|(&q, &t)| pinball_term(q, t)).sum::<f64>() / 4.0;
    let sl: Vec<f64> = q.iter().zip(&taus).map(|(&q, &t)| pinball_slope(q, t)).collect();
    let d_yaw = -(sl[0] + sl[1]) / 4.0;
    let d_pitch = -(sl[2] + sl[3]) / 4.0;
    let d_sigma = (sl[0] - sl[1] + sl[2] - sl[3]) / 4.0;
    (loss, [d_yaw, d_pitch, d_sigma])
}

pub fn mse_loss(pred: &SphericalGaze, gt: &SphericalGaze) -> f64 {
    mse_loss_grad(pred, gt).0
}

pub fn mse_loss_grad(pred: &SphericalGaze, gt: &SphericalGaze) -> (f64, [f64; 3]) {
    let [ey, ep] = residuals(pred, gt);
    ((ey * ey + ep * ep) / 2.0, [-ey, -ep, 0.0])
}

pub fn loss_grad(kind: LossKind, pred: &SphericalGaze, gt: &SphericalGaze) -> (f64, [f64; 3]) {
    match kind {
        LossKind::Pinball => pinball_loss_grad(pred, gt),
        LossKind::Mse => mse_loss_grad(pred, gt),
    }
}
