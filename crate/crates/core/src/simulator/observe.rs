//! Observation model standing in for a head-crop appearance embedding.

use rand::Rng as _;

use super::{NoiseConfig, SubjectState};
use crate::geometry::{wrap_angle, SphericalGaze};
use crate::rng::{self, Rng};

pub const N_FEATURES: usize = 8;

/// Feature vector layout.
pub mod feature {
    /// Observed head yaw, rad.
    pub const HEAD_YAW: usize = 0;
    /// Observed head pitch, rad.
    pub const HEAD_PITCH: usize = 1;
    /// Eye-cue gaze yaw, rad (0 when hidden).
    pub const EYE_YAW: usize = 2;
    /// Eye-cue gaze pitch, rad (0 when hidden).
    pub const EYE_PITCH: usize = 3;
    /// 1 when the eye cues are valid, else 0.
    pub const VISIBLE: usize = 4;
    pub const SIN_HEAD_YAW: usize = 5;
    pub const COS_HEAD_YAW: usize = 6;
    /// Head angular speed proxy for motion blur, rad/s.
    pub const BLUR: usize = 7;
}

/// Channels that change sign under a horizontal flip of the head crop.
pub const YAW_CHANNELS: [usize; 3] = [feature::HEAD_YAW, feature::EYE_YAW, feature::SIN_HEAD_YAW];

/// Horizontally mirrored feature vector.
pub fn mirror_features(x: &[f64]) -> Vec<f64> {
    let mut m = x.to_vec();
    for &c in &YAW_CHANNELS {
        if c < m.len() {
            m[c] = -m[c];
        }
    }
    m
}

/// Draws the observation vector for one subject at one frame.
///
/// Every call consumes the same number of draws regardless of visibility,
/// so streams stay aligned across noise settings.
pub fn observe(state: &SubjectState, gt: SphericalGaze, noise: &NoiseConfig, rng: &mut Rng) -> Vec<f64> {
    let n_head_yaw = rng::normal(rng);
    let n_head_pitch = rng::normal(rng);
    let n_eye_yaw = rng::normal(rng);
    let n_eye_pitch = rng::normal(rng);
    let n_blur = rng::normal(rng);
    let u_drop: f64 = rng.random();

    let head_sigma = noise.obs_head_deg.to_radians();
    let head_yaw = wrap_angle(state.head_yaw + head_sigma * n_head_yaw);
    let head_pitch = state.head_pitch + head_sigma * n_head_pitch;

    let eye_sigma = (noise.obs_base_deg
        + noise.obs_yaw_gain * state.head_yaw.abs()
        + noise.obs_blur_gain * state.head_speed)
        .to_radians();
    let occluded = gt.yaw.abs() > noise.occlusion_yaw_deg.to_radians();
    let dropped = u_drop < noise.cue_dropout_prob;
    let visible = !(occluded || dropped);

    let mut x = vec![0.0; N_FEATURES];
    x[feature::HEAD_YAW] = head_yaw;
    x[feature::HEAD_PITCH] = head_pitch;
    if visible {
        x[feature::EYE_YAW] = gt.yaw + eye_sigma * n_eye_yaw;
        x[feature::EYE_PITCH] = gt.pitch + eye_sigma * n_eye_pitch;
        x[feature::VISIBLE] = 1.0;
    }
    x[feature::SIN_HEAD_YAW] = head_yaw.sin();
    x[feature::COS_HEAD_YAW] = head_yaw.cos();
    x[feature::BLUR] = state.head_speed + noise.blur_offset + noise.blur_noise * n_blur;
    x
}
