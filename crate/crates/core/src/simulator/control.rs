//! Label-accuracy control experiment: noisy labelling pipeline vs. exact gaze.

use serde::{Deserialize, Serialize};

use super::{simulate_session, NoiseConfig, SessionConfig};
use crate::acquisition::label_gaze;
use crate::error::Result;
use crate::geometry::spherical_error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBreakdown {
    pub source: String,
    pub mean_label_error_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub n_frames: usize,
    /// Frames the labelling pipeline rejected (e.g. a noisy ray above the horizon).
    pub n_failed: usize,
    pub mean_label_error_deg: f64,
    pub median_label_error_deg: f64,
    pub p90_label_error_deg: f64,
    pub breakdown: Vec<NoiseBreakdown>,
}

/// Label errors (degrees) over sessions `0..n_runs`, plus the failure count.
fn label_errors(cfg: &SessionConfig, n_runs: u32) -> Result<(Vec<f64>, usize)> {
    let rig = cfg.rig();
    let mut errs = Vec::new();
    let mut failed = 0;
    for run in 0..n_runs {
        let session = simulate_session(cfg, run)?;
        for r in &session.records {
            match label_gaze(&r.detection, &r.marker, &cfg.board, &rig) {
                Ok(l) => errs.push(spherical_error(l.spherical, r.gt_gaze)),
                Err(_) => failed += 1,
            }
        }
    }
    Ok((errs, failed))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Runs the labelling pipeline on noisy detections and compares to ground truth.
///
/// The breakdown repeats the run with one label-noise source active at a time.
pub fn control_experiment(cfg: &SessionConfig, n_runs: u32) -> Result<ControlReport> {
    let (mut errs, n_failed) = label_errors(cfg, n_runs)?;
    let mean_err = mean(&errs);
    errs.sort_by(f64::total_cmp);

    let base = cfg.noise.without_label_noise();
    let sources: [(&str, NoiseConfig); 3] = [
        ("marker_rotation", NoiseConfig { marker_rot_deg: cfg.noise.marker_rot_deg, ..base }),
        ("marker_translation", NoiseConfig { marker_trans_m: cfg.noise.marker_trans_m, ..base }),
        ("keypoint", NoiseConfig { keypoint_deg: cfg.noise.keypoint_deg, ..base }),
    ];
    let mut breakdown = Vec::with_capacity(sources.len());
    for (name, noise) in sources {
        let sub = SessionConfig { noise, ..cfg.clone() };
        let (e, _) = label_errors(&sub, n_runs)?;
        breakdown.push(NoiseBreakdown { source: name.to_string(), mean_label_error_deg: mean(&e) });
    }

    Ok(ControlReport {
        n_frames: errs.len(),
        n_failed,
        mean_label_error_deg: mean_err,
        median_label_error_deg: percentile(&errs, 0.5),
        p90_label_error_deg: percentile(&errs, 0.9),
        breakdown,
    })
}
