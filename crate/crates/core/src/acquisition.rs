//! Ground-truth gaze labels from body-keypoint rays and fiducial board poses.
//!
//! The rig provides a world-frame ray per detected keypoint. Eye distance is
//! not observed directly: it is fixed by intersecting the feet ray with the
//! ground plane (known camera height) and placing the eyes on the vertical
//! line through that ground point. Subjects too close for their feet to be in
//! view fall back to the hip ray plus average body proportions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{gaze_in_eye_coords, to_spherical, Mat3, SphericalGaze, UnitVec3, Vec3};

/// A calibrated per-pixel viewing ray, world frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PixelRay {
    pub direction: UnitVec3,
}

impl PixelRay {
    pub fn new(direction: UnitVec3) -> Self {
        Self { direction }
    }

    /// Ray towards a world point; `None` if the point is at the origin.
    pub fn towards(p: Vec3) -> Option<Self> {
        p.normalized().map(Self::new)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectDetection {
    pub subject_id: u32,
    pub eye_ray: PixelRay,
    pub feet_ray: Option<PixelRay>,
    pub hip_ray: Option<PixelRay>,
}

/// Board pose: `rotation` maps board coordinates into the world frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerObservation {
    pub rotation: Mat3,
    pub translation: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardGeometry {
    /// Fixation cross position relative to the tag origin, board frame (m).
    pub cross_offset: Vec3,
}

impl Default for BoardGeometry {
    fn default() -> Self {
        Self { cross_offset: Vec3::new(0.35, 0.0, 0.0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyRatios {
    pub eye_height_ratio: f64,
    pub hip_height_ratio: f64,
}

impl Default for BodyRatios {
    fn default() -> Self {
        Self { eye_height_ratio: 0.936, hip_height_ratio: 0.530 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigConfig {
    /// Camera height above the ground plane (m).
    pub camera_height: f64,
    pub body_ratios: BodyRatios,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self { camera_height: 1.6, body_ratios: BodyRatios::default() }
    }
}

impl RigConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.body_ratios;
        let ok = self.camera_height > 0.0
            && self.camera_height.is_finite()
            && r.hip_height_ratio > 0.0
            && r.eye_height_ratio < 1.0
            && r.eye_height_ratio > r.hip_height_ratio;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid rig configuration {self:?}")))
        }
    }
}

/// Tangent of a ray's elevation; infinite for vertical rays.
fn elevation_tan(dir: UnitVec3) -> f64 {
    dir.z() / dir.x().hypot(dir.y())
}

/// Horizontal distance from the camera to the subject's standing point.
fn standing_distance(det: &SubjectDetection, rig: &RigConfig) -> Result<f64> {
    let c = rig.camera_height;
    if let Some(feet) = det.feet_ray {
        let t = elevation_tan(feet.direction);
        if !(t < 0.0) || !t.is_finite() {
            return Err(Error::RayAboveHorizon);
        }
        return Ok(c / -t);
    }
    let hip = det.hip_ray.ok_or(Error::NoBodyRay)?;
    // Unknowns: horizontal distance ρ and stature H.
    //   ρ·tan(e_hip) − r_hip·H = −c
    //   ρ·tan(e_eye) − r_eye·H = −c
    let (t_h, t_e) = (elevation_tan(hip.direction), elevation_tan(det.eye_ray.direction));
    let (r_h, r_e) = (rig.body_ratios.hip_height_ratio, rig.body_ratios.eye_height_ratio);
    let det_a = r_h * t_e - r_e * t_h;
    if !t_h.is_finite() || !t_e.is_finite() || det_a.abs() < 1e-12 {
        return Err(Error::RayAboveHorizon);
    }
    let rho = c * (r_e - r_h) / det_a;
    let stature = (c + rho * t_h) / r_h;
    if rho <= 0.0 || stature <= 0.0 {
        return Err(Error::RayAboveHorizon);
    }
    Ok(rho)
}

/// Recovers the 3D eye midpoint from keypoint rays and the rig height.
pub fn recover_eye_position(det: &SubjectDetection, rig: &RigConfig) -> Result<Vec3> {
    if det.feet_ray.is_none() && det.hip_ray.is_none() {
        return Err(Error::NoBodyRay);
    }
    let rho = standing_distance(det, rig)?;
    let eye = det.eye_ray.direction;
    let h = eye.x().hypot(eye.y());
    if h < 1e-12 {
        return Err(Error::DegenerateEyePosition);
    }
    Ok(eye.as_vec() * (rho / h))
}

/// World position of the fixation cross.
pub fn cross_position(m: &MarkerObservation, b: &BoardGeometry) -> Vec3 {
    m.rotation.mul_vec(b.cross_offset) + m.translation
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GazeLabel {
    pub eye_position: Vec3,
    pub gaze: UnitVec3,
    pub spherical: SphericalGaze,
}

/// Full labeling pipeline for one frame.
pub fn label_gaze(
    det: &SubjectDetection,
    m: &MarkerObservation,
    b: &BoardGeometry,
    rig: &RigConfig,
) -> Result<GazeLabel> {
    let p_e = recover_eye_position(det, rig)?;
    let p_t = cross_position(m, b);
    let g = gaze_in_eye_coords(p_t, p_e)?;
    Ok(GazeLabel { eye_position: p_e, gaze: g, spherical: to_spherical(g) })
}
