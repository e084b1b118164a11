//! Error subsets, uncertainty ranking, quantile coverage and yaw curves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{from_spherical, spherical_error, wrap_angle, SphericalGaze};

/// Upper bound on the angle between gaze and the camera direction for the
/// "front 180°" subset, degrees.
pub const FRONT180_DEG: f64 = 90.0;
/// Same, for the "front facing" subset.
pub const FRONT_FACING_DEG: f64 = 20.0;
pub const DEFAULT_BIN_DEG: f64 = 15.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_all: usize,
    pub n_front180: usize,
    pub n_frontfacing: usize,
    /// Mean angular errors in degrees; 0 for an empty subset.
    pub mean_err_all: f64,
    pub mean_err_front180: f64,
    pub mean_err_frontfacing: f64,
    pub uncert_spearman: Option<f64>,
    /// Per-angle coverage of `[pred − σ, pred + σ]`.
    pub coverage80: Option<f64>,
    /// Fraction of samples covered in both angles at once.
    pub coverage80_joint: Option<f64>,
    pub yaw_bins: Vec<YawBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YawBin {
    pub center_deg: f64,
    pub n: usize,
    pub mean_error_deg: f64,
    pub mean_sigma_deg: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub yaw: f64,
    pub pitch: f64,
    /// Mean of the yaw and pitch coverages.
    pub per_angle: f64,
    pub joint: f64,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch(a, b))
    }
}

/// Angle between a gaze and the direction back to the camera, degrees.
pub fn angle_to_camera(g: SphericalGaze) -> f64 {
    // The camera lies along −z of the eye frame.
    (-from_spherical(g).z()).clamp(-1.0, 1.0).acos().to_degrees()
}

fn mean(v: impl Iterator<Item = f64>) -> (usize, f64) {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n, if n == 0 { 0.0 } else { s / n as f64 })
}

/// Mean errors over all samples and over the front subsets, selected by the
/// ground-truth direction.
pub fn subset_errors(preds: &[SphericalGaze], gts: &[SphericalGaze]) -> Result<MetricsReport> {
    check_lengths(preds.len(), gts.len())?;
    let rows: Vec<(f64, f64)> = preds.iter().zip(gts).map(|(p, g)| (spherical_error(*p, *g), angle_to_camera(*g))).collect();
    let (n_all, mean_err_all) = mean(rows.iter().map(|r| r.0));
    let (n_front180, mean_err_front180) = mean(rows.iter().filter(|r| r.1 <= FRONT180_DEG).map(|r| r.0));
    let (n_frontfacing, mean_err_frontfacing) = mean(rows.iter().filter(|r| r.1 <= FRONT_FACING_DEG).map(|r| r.0));
    Ok(MetricsReport {
        n_all,
        n_front180,
        n_frontfacing,
        mean_err_all,
        mean_err_front180,
        mean_err_frontfacing,
        ..Default::default()
    })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Spearman rank correlation; 0 when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    if a.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: a.len() });
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// Rank correlation between predicted σ and the realized angular error.
pub fn uncertainty_correlation(preds: &[SphericalGaze], gts: &[SphericalGaze]) -> Result<f64> {
    check_lengths(preds.len(), gts.len())?;
    let sig: Vec<f64> = preds.iter().map(|p| p.sigma.ok_or(Error::MissingSigma)).collect::<Result<_>>()?;
    let err: Vec<f64> = preds.iter().zip(gts).map(|(p, g)| spherical_error(*p, *g)).collect();
    spearman(&sig, &err)
}

pub fn coverage(preds: &[SphericalGaze], gts: &[SphericalGaze]) -> Result<Coverage> {
    check_lengths(preds.len(), gts.len())?;
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut y, mut p, mut j) = (0usize, 0usize, 0usize);
    for (pr, g) in preds.iter().zip(gts) {
        let s = pr.sigma.ok_or(Error::MissingSigma)?;
        let cy = wrap_angle(g.yaw - pr.yaw).abs() <= s;
        let cp = (g.pitch - pr.pitch).abs() <= s;
        y += cy as usize;
        p += cp as usize;
        j += (cy && cp) as usize;
    }
    let n = preds.len() as f64;
    let (y, p) = (y as f64 / n, p as f64 / n);
    Ok(Coverage { yaw: y, pitch: p, per_angle: (y + p) / 2.0, joint: j as f64 / n })
}

fn binned(
    preds: &[SphericalGaze],
    gts: &[SphericalGaze],
    bin_width_deg: f64,
    key: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> Result<Vec<YawBin>> {
    check_lengths(preds.len(), gts.len())?;
    if !(bin_width_deg > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width_deg}")));
    }
    let n_bins = ((hi - lo) / bin_width_deg).ceil() as usize;
    let mut acc = vec![(0usize, 0.0, 0.0, true); n_bins];
    for (p, g) in preds.iter().zip(gts) {
        let k = key(g.yaw.to_degrees());
        let b = (((k - lo) / bin_width_deg).floor().max(0.0) as usize).min(n_bins - 1);
        let a = &mut acc[b];
        a.0 += 1;
        a.1 += spherical_error(*p, *g);
        match p.sigma {
            Some(s) => a.2 += s.to_degrees(),
            None => a.3 = false,
        }
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .filter(|(_, a)| a.0 > 0)
        .map(|(b, (n, e, s, has_sigma))| YawBin {
            center_deg: lo + (b as f64 + 0.5) * bin_width_deg,
            n,
            mean_error_deg: e / n as f64,
            mean_sigma_deg: has_sigma.then(|| s / n as f64),
        })
        .collect())
}

/// Per-bin mean error and σ against signed ground-truth yaw in [−180°, 180°).
/// Empty bins are omitted.
pub fn yaw_curve(preds: &[SphericalGaze], gts: &[SphericalGaze], bin_width_deg: f64) -> Result<Vec<YawBin>> {
    binned(preds, gts, bin_width_deg, |y| y, -180.0, 180.0)
}

/// As [`yaw_curve`], folding left and right onto |yaw| in [0°, 180°].
pub fn abs_yaw_curve(preds: &[SphericalGaze], gts: &[SphericalGaze], bin_width_deg: f64) -> Result<Vec<YawBin>> {
    binned(preds, gts, bin_width_deg, f64::abs, 0.0, 180.0)
}

/// All report fields; uncertainty fields are `None` for models without σ.
pub fn evaluate_predictions(preds: &[SphericalGaze], gts: &[SphericalGaze], bin_width_deg: f64) -> Result<MetricsReport> {
    let mut r = subset_errors(preds, gts)?;
    if !preds.is_empty() && preds.iter().all(|p| p.sigma.is_some()) {
        let c = coverage(preds, gts)?;
        r.coverage80 = Some(c.per_angle);
        r.coverage80_joint = Some(c.joint);
        if preds.len() >= 3 {
            r.uncert_spearman = Some(uncertainty_correlation(preds, gts)?);
        }
    }
    r.yaw_bins = yaw_curve(preds, gts, bin_width_deg)?;
    Ok(r)
}

pub fn yaw_curve_csv(bins: &[YawBin]) -> String {
    let mut s = String::from("bin_center_deg,n,mean_error_deg,mean_sigma_deg\n");
    for b in bins {
        let sigma = b.mean_sigma_deg.map(|v| format!("{v:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{:.3},{},{:.6},{}", b.center_deg, b.n, b.mean_error_deg, sigma);
    }
    s
}

pub fn write_yaw_curve_csv(path: &Path, bins: &[YawBin]) -> Result<()> {
    fs::write(path, yaw_curve_csv(bins)).map_err(|e| Error::io(path, e))
}
