//! Synthetic capture sessions.
//!
//! A session places several standing subjects around the camera, carries a
//! fiducial board once around a large loop and then through the space between
//! camera and subjects, and has every subject fixate the board's cross while
//! alternating between "move" (head follows gaze) and "freeze" (head held,
//! eyes do the work) instructions. Each frame yields noisy keypoint rays, a
//! noisy board pose, a low-dimensional observation vector standing in for a
//! head crop, and the exact gaze.

mod control;
mod dataset;
mod observe;
mod session;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::acquisition::{BoardGeometry, BodyRatios, MarkerObservation, RigConfig, SubjectDetection};
use crate::error::{Error, Result};
use crate::geometry::SphericalGaze;

pub use control::{control_experiment, ControlReport, NoiseBreakdown};
pub use dataset::{
    export_dataset, load_dataset, load_split, read_jsonl, split_sessions, write_jsonl, DatasetSplit, Split,
    SplitRatios, TEST_FILE, TRAIN_FILE, VAL_FILE,
};
pub use observe::{feature, mirror_features, observe, N_FEATURES, YAW_CHANNELS};
pub use session::{simulate_session, simulate_sessions, SimulatedSession, SubjectState};
pub use trajectory::{generate_trajectory, BoardSample, Trajectory};

/// Per-frame noise magnitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Board orientation noise, degrees (random axis).
    pub marker_rot_deg: f64,
    /// Board position noise, metres per axis.
    pub marker_trans_m: f64,
    /// Keypoint ray noise, degrees.
    pub keypoint_deg: f64,
    /// Base noise of the eye cues, degrees.
    pub obs_base_deg: f64,
    /// Extra eye-cue noise per radian of |head yaw|, degrees.
    pub obs_yaw_gain: f64,
    /// Extra eye-cue noise per rad/s of head motion, degrees.
    pub obs_blur_gain: f64,
    /// Head-pose cue noise, degrees.
    pub obs_head_deg: f64,
    /// |gaze yaw| beyond which the eyes are hidden, degrees.
    pub occlusion_yaw_deg: f64,
    /// Probability that the eye cues drop out on a given frame.
    pub cue_dropout_prob: f64,
    /// Noise on the blur channel, rad/s.
    pub blur_noise: f64,
    /// Constant bias on the blur channel (models a different sensor).
    pub blur_offset: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            marker_rot_deg: 2.0,
            marker_trans_m: 0.11,
            keypoint_deg: 2.0,
            obs_base_deg: 2.0,
            obs_yaw_gain: 4.0,
            obs_blur_gain: 4.0,
            obs_head_deg: 4.0,
            occlusion_yaw_deg: 140.0,
            cue_dropout_prob: 0.2,
            blur_noise: 0.05,
            blur_offset: 0.0,
        }
    }
}

impl NoiseConfig {
    /// All noise off, eyes never drop out.
    pub fn noiseless() -> Self {
        Self {
            marker_rot_deg: 0.0,
            marker_trans_m: 0.0,
            keypoint_deg: 0.0,
            obs_base_deg: 0.0,
            obs_yaw_gain: 0.0,
            obs_blur_gain: 0.0,
            obs_head_deg: 0.0,
            cue_dropout_prob: 0.0,
            blur_noise: 0.0,
            ..Self::default()
        }
    }

    /// Copy with the label-pipeline noise (board and keypoints) removed.
    pub fn without_label_noise(self) -> Self {
        Self { marker_rot_deg: 0.0, marker_trans_m: 0.0, keypoint_deg: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.marker_rot_deg,
            self.marker_trans_m,
            self.keypoint_deg,
            self.obs_base_deg,
            self.obs_yaw_gain,
            self.obs_blur_gain,
            self.obs_head_deg,
            self.occlusion_yaw_deg,
            self.blur_noise,
        ];
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !self.blur_offset.is_finite() {
            return Err(Error::Config("noise magnitudes must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.cue_dropout_prob) {
            return Err(Error::Config("cue_dropout_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Board carrier path parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    /// Carrier walking speed, m/s.
    pub walk_speed: f64,
    /// Vertical board oscillation amplitude, m.
    pub oscillation_amplitude: f64,
    /// Vertical board oscillation period, s.
    pub oscillation_period: f64,
    /// Radius of the circle whose chord forms the inner pass, m.
    pub inner_radius: f64,
    /// Mean height of the tag origin relative to the camera, m.
    pub board_height: f64,
    /// Clearance kept between the loop and the farthest subject, m.
    pub loop_clearance: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            walk_speed: 1.0,
            oscillation_amplitude: 0.8,
            oscillation_period: 6.0,
            inner_radius: 0.7,
            board_height: -0.1,
            loop_clearance: 0.75,
        }
    }
}

/// Subject population and behaviour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubjectConfig {
    pub stature_mean: f64,
    pub stature_sd: f64,
    /// Time constant of head tracking during "move", s.
    pub head_lag_s: f64,
    /// Fraction of gaze pitch the head follows during "move".
    pub head_pitch_gain: f64,
    /// Eye-in-head rotation limit, degrees.
    pub eye_in_head_limit_deg: f64,
    /// Feet below this elevation are out of view and the hip ray is used, degrees.
    pub feet_min_elevation_deg: f64,
    /// Frames with the cross closer than this to the eyes are dropped, m.
    pub min_target_distance: f64,
}

impl Default for SubjectConfig {
    fn default() -> Self {
        Self {
            stature_mean: 1.70,
            stature_sd: 0.08,
            head_lag_s: 0.5,
            head_pitch_gain: 0.6,
            eye_in_head_limit_deg: 50.0,
            feet_min_elevation_deg: -55.0,
            min_target_distance: 0.5,
        }
    }
}

/// Configuration of one capture session (JSON field names match).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub n_subjects: usize,
    /// Horizontal subject distance from the camera, m.
    pub subject_distance_range: [f64; 2],
    /// Outer loop radius, m.
    pub loop_radius_range: [f64; 2],
    pub camera_height: f64,
    pub fps: f64,
    /// Duration of each "move" and each "freeze" phase, s.
    pub move_freeze_period: f64,
    pub noise: NoiseConfig,
    pub seed: u64,
    pub body_ratios: BodyRatios,
    pub board: BoardGeometry,
    pub trajectory: TrajectoryConfig,
    pub subjects: SubjectConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_subjects: 5,
            subject_distance_range: [1.0, 3.0],
            loop_radius_range: [2.0, 5.0],
            camera_height: 1.6,
            fps: 8.0,
            move_freeze_period: 4.0,
            noise: NoiseConfig::default(),
            seed: 0,
            body_ratios: BodyRatios::default(),
            board: BoardGeometry::default(),
            trajectory: TrajectoryConfig::default(),
            subjects: SubjectConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn rig(&self) -> RigConfig {
        RigConfig { camera_height: self.camera_height, body_ratios: self.body_ratios }
    }

    pub fn validate(&self) -> Result<()> {
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1];
        if self.n_subjects == 0 {
            return Err(Error::Config("n_subjects must be positive".into()));
        }
        if !range_ok(self.subject_distance_range) {
            return Err(Error::Config("subject_distance_range must be positive and ordered".into()));
        }
        if !range_ok(self.loop_radius_range) {
            return Err(Error::Config("loop_radius_range must be positive and ordered".into()));
        }
        if !(self.fps > 0.0) || !(self.move_freeze_period > 0.0) {
            return Err(Error::Config("fps and move_freeze_period must be positive".into()));
        }
        let t = &self.trajectory;
        if !(t.walk_speed > 0.0) || !(t.oscillation_period > 0.0) || !(t.inner_radius > 0.0) {
            return Err(Error::Config("trajectory speed, period and inner radius must be positive".into()));
        }
        if t.oscillation_amplitude < 0.0 || t.loop_clearance < 0.0 {
            return Err(Error::Config("trajectory amplitude and clearance must be non-negative".into()));
        }
        let s = &self.subjects;
        if !(s.stature_mean > 0.0) || s.stature_sd < 0.0 || !(s.head_lag_s > 0.0) {
            return Err(Error::Config("invalid subject population parameters".into()));
        }
        if !(s.eye_in_head_limit_deg > 0.0) {
            return Err(Error::Config("eye_in_head_limit_deg must be positive".into()));
        }
        self.noise.validate()?;
        self.rig().validate()
    }
}

/// Head orientation relative to the camera ray, radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub yaw: f64,
    pub pitch: f64,
}

/// One simulated capture frame for one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub session_id: u32,
    pub subject_id: u32,
    pub frame_index: u32,
    pub timestamp: f64,
    pub detection: SubjectDetection,
    pub marker: MarkerObservation,
    pub features: Vec<f64>,
    pub gt_gaze: SphericalGaze,
    pub gt_head: HeadPose,
    pub visible: bool,
}
