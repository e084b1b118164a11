//! Central finite-difference verification of the analytic gradients.

use super::loss::{loss_grad, pinball_residuals, LossKind};
use super::model::ModelParams;
use super::params::ParamSet;
use crate::error::Result;
use crate::geometry::{wrap_angle, SphericalGaze};

/// Samples whose pinball residuals lie within this distance of a kink are
/// not checked.
pub const KINK_MARGIN: f64 = 1e-3;

/// Gradient magnitudes below this are compared absolutely.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Name and index of the entry with the largest error.
    pub worst: (String, usize),
    pub n_checked: usize,
}

/// `|a − n| / max(|a|, |n|, MAGNITUDE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// True when `pred` is far enough from every non-differentiable point of
/// the loss for a central difference with step `eps` to be meaningful.
pub fn away_from_kinks(kind: LossKind, pred: &SphericalGaze, gt: &SphericalGaze) -> bool {
    let seam = std::f64::consts::PI - wrap_angle(gt.yaw - pred.yaw).abs() > KINK_MARGIN;
    match kind {
        LossKind::Mse => seam,
        LossKind::Pinball => seam && pinball_residuals(pred, gt).iter().all(|q| q.abs() > KINK_MARGIN),
    }
}

fn loss_at(params: &ModelParams, frames: &[&[f64]], gt: &SphericalGaze) -> Result<f64> {
    let (pred, _) = params.forward(frames, None)?;
    Ok(loss_grad(params.loss, &pred, gt).0)
}

/// Compares every parameter's analytic gradient with a central difference.
/// Returns `None` when the sample sits next to a kink.
pub fn grad_check(params: &ModelParams, frames: &[&[f64]], gt: &SphericalGaze, eps: f64) -> Result<Option<GradCheckReport>> {
    let frames = params.select_frames(frames)?;
    let (pred, cache) = params.forward(frames, None)?;
    if !away_from_kinks(params.loss, &pred, gt) {
        return Ok(None);
    }
    let (_, d) = loss_grad(params.loss, &pred, gt);
    let mut grads = params.zeros_like();
    params.backward(&cache, d, None, &mut grads);
    let analytic: Vec<(String, Vec<f64>)> =
        grads.tensors().into_iter().map(|t| (t.name, t.data.to_vec())).collect();

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (String::new(), 0), n_checked: 0 };
    let mut probe = params.clone();
    for (ti, (name, a)) in analytic.iter().enumerate() {
        for (k, &ak) in a.iter().enumerate() {
            let orig = probe.tensors_mut()[ti][k];
            probe.tensors_mut()[ti][k] = orig + eps;
            let lp = loss_at(&probe, frames, gt)?;
            probe.tensors_mut()[ti][k] = orig - eps;
            let lm = loss_at(&probe, frames, gt)?;
            probe.tensors_mut()[ti][k] = orig;
            let rel = relative_error(ak, (lp - lm) / (2.0 * eps));
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (name.clone(), k);
            }
            report.n_checked += 1;
        }
    }
    Ok(Some(report))
}
