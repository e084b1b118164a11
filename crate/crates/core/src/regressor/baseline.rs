//! Reference predictors: the training-set mean gaze and dropout sampling.

use rayon::prelude::*;

use super::model::ModelParams;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, SphericalGaze};
use crate::rng::{self, tag};
use crate::simulator::Split;

/// Circular mean of yaw and arithmetic mean of pitch over the window
/// centers of `split`.
pub fn mean_baseline(split: &Split) -> Result<SphericalGaze> {
    let gts = split.targets();
    if gts.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (s, c) = gts.iter().fold((0.0, 0.0), |(s, c), g| (s + g.yaw.sin(), c + g.yaw.cos()));
    let pitch = gts.iter().map(|g| g.pitch).sum::<f64>() / gts.len() as f64;
    Ok(SphericalGaze::new(wrap_angle(s.atan2(c)), pitch))
}

/// Mean of `n` dropout-perturbed predictions with `σ̂` the square root of
/// the mean per-angle population variance.
pub fn mc_dropout_uncertainty(params: &ModelParams, window: &[&[f64]], n: usize, seed: u64) -> Result<SphericalGaze> {
    if params.arch.dropout_rate <= 0.0 {
        return Err(Error::DropoutDisabled);
    }
    if n == 0 {
        return Err(Error::Config("need at least one dropout pass".into()));
    }
    let frames = params.select_frames(window)?;
    let mut yaws = Vec::with_capacity(n);
    let mut pitches = Vec::with_capacity(n);
    for pass in 0..n {
        let masks = params.sample_dropout_masks(&mut rng::stream(seed, &[tag::DROPOUT, pass as u64]));
        let (p, _) = params.forward(frames, Some(masks))?;
        yaws.push(p.yaw);
        pitches.push(p.pitch);
    }
    // Yaw samples are unwrapped around the first pass before averaging.
    let y0 = yaws[0];
    let dy: Vec<f64> = yaws.iter().map(|y| wrap_angle(y - y0)).collect();
    let k = n as f64;
    let mean_dy = dy.iter().sum::<f64>() / k;
    let mean_p = pitches.iter().sum::<f64>() / k;
    let var_y = dy.iter().map(|d| (d - mean_dy).powi(2)).sum::<f64>() / k;
    let var_p = pitches.iter().map(|p| (p - mean_p).powi(2)).sum::<f64>() / k;
    Ok(SphericalGaze { yaw: wrap_angle(y0 + mean_dy), pitch: mean_p, sigma: Some(((var_y + var_p) / 2.0).sqrt()) })
}

/// Dropout-sampled predictions for every window of `split`; each window
/// draws from its own seeded stream.
pub fn mc_dropout_split(params: &ModelParams, split: &Split, n: usize, seed: u64) -> Result<Vec<SphericalGaze>> {
    (0..split.len())
        .into_par_iter()
        .map(|i| mc_dropout_uncertainty(params, &split.window_features(i), n, rng::derive_seed(seed, &[i as u64])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressor::{Architecture, LossKind, ModelKind};
    use crate::simulator::{FrameRecord, HeadPose};
    use crate::acquisition::{MarkerObservation, PixelRay, SubjectDetection};
    use crate::geometry::{Mat3, Vec3};

    fn record(i: u32, yaw: f64, pitch: f64) -> FrameRecord {
        let ray = PixelRay::towards(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        FrameRecord {
            session_id: 0,
            subject_id: 0,
            frame_index: i,
            timestamp: i as f64,
            detection: SubjectDetection { subject_id: 0, eye_ray: ray, feet_ray: None, hip_ray: None },
            marker: MarkerObservation { rotation: Mat3::IDENTITY, translation: Vec3::ZERO },
            features: vec![0.1; 8],
            gt_gaze: SphericalGaze::new(yaw, pitch),
            gt_head: HeadPose { yaw, pitch },
            visible: true,
        }
    }

    #[test]
    fn equal_labels_give_that_label() {
        let s = Split::new((0..4).map(|i| record(i, 0.4, -0.2)).collect(), 1).unwrap();
        let m = mean_baseline(&s).unwrap();
        assert!((m.yaw - 0.4).abs() < 1e-12 && (m.pitch + 0.2).abs() < 1e-12);
    }

    #[test]
    fn yaw_mean_is_circular() {
        let a = 170f64.to_radians();
        let s = Split::new(vec![record(0, a, 0.0), record(1, -a, 0.0)], 1).unwrap();
        let m = mean_baseline(&s).unwrap();
        assert!((m.yaw.abs() - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn empty_split() {
        let s = Split::new(Vec::new(), 1).unwrap();
        assert!(matches!(mean_baseline(&s), Err(Error::EmptyDataset)));
    }

    #[test]
    fn dropout_sampling_contract() {
        let arch = Architecture { hidden: 6, feature_dim: 5, ..Default::default() };
        let p = ModelParams::init(ModelKind::Static, LossKind::Mse, arch, 1).unwrap();
        let x = [0.2, -0.1, 0.3, 0.0, 1.0, 0.2, 0.9, 0.1];
        let w: Vec<&[f64]> = vec![&x];
        assert_eq!(mc_dropout_uncertainty(&p, &w, 1, 3).unwrap().sigma, Some(0.0));
        let a = mc_dropout_uncertainty(&p, &w, 5, 3).unwrap();
        assert_eq!(a, mc_dropout_uncertainty(&p, &w, 5, 3).unwrap());
        assert!(a.sigma.unwrap() > 0.0);
        let off = ModelParams::init(ModelKind::Static, LossKind::Mse, Architecture { dropout_rate: 0.0, ..arch }, 1)
            .unwrap();
        assert!(matches!(mc_dropout_uncertainty(&off, &w, 5, 3), Err(Error::DropoutDisabled)));
    }
}
