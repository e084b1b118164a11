//! Coordinate frames, gaze vectors and spherical gaze angles.
//!
//! The world (rig) frame has the camera at the origin and its third axis
//! pointing up; the ground plane is horizontal. Gaze is expressed in a
//! roll-free eye frame whose third axis runs along the camera-to-eye ray, so
//! a subject looking straight into the camera has gaze `(0, 0, -1)`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// World vertical.
pub const UP: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

/// Minimum horizontal eye distance for a well-defined eye frame (m).
pub const MIN_HORIZONTAL_DISTANCE: f64 = 1e-6;
/// Minimum eye-to-target distance (m).
pub const MIN_TARGET_DISTANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Length of the projection onto the ground plane.
    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero vectors.
    pub fn normalized(self) -> Option<UnitVec3> {
        let n = self.norm();
        (n > 1e-300 && n.is_finite()).then(|| UnitVec3(self * (1.0 / n)))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A direction with unit Euclidean norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec3", try_from = "Vec3")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    /// Normalizes `v`; fails for zero or non-finite input.
    pub fn new(v: Vec3) -> Option<Self> {
        v.normalized()
    }

    /// Keeps `v` bit-for-bit when it is already unit length to within
    /// rounding, so serialized directions reload unchanged.
    pub fn new_preserving(v: Vec3) -> Option<Self> {
        let n2 = v.dot(v);
        if (n2 - 1.0).abs() < 1e-14 {
            Some(UnitVec3(v))
        } else {
            v.normalized()
        }
    }

    pub fn x(self) -> f64 {
        self.0.x
    }
    pub fn y(self) -> f64 {
        self.0.y
    }
    pub fn z(self) -> f64 {
        self.0.z
    }

    pub fn as_vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(self, o: UnitVec3) -> f64 {
        self.0.dot(o.0)
    }

    /// Elevation above the horizontal plane, radians.
    pub fn elevation(self) -> f64 {
        self.0.z.clamp(-1.0, 1.0).asin()
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(u: UnitVec3) -> Vec3 {
        u.0
    }
}

impl TryFrom<Vec3> for UnitVec3 {
    type Error = String;
    fn try_from(v: Vec3) -> std::result::Result<Self, String> {
        UnitVec3::new_preserving(v).ok_or_else(|| "zero-length direction".to_string())
    }
}

impl Neg for UnitVec3 {
    type Output = UnitVec3;
    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_rows(r0: Vec3, r1: Vec3, r2: Vec3) -> Self {
        Mat3([r0.to_array(), r1.to_array(), r2.to_array()])
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self::from_rows(c0, c1, c2).transpose()
    }

    pub fn from_row_major(v: &[f64; 9]) -> Self {
        Mat3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.0[i])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn determinant(&self) -> f64 {
        self.row(0).dot(self.row(1).cross(self.row(2)))
    }

    /// Rotation by `angle` radians about `axis` (Rodrigues).
    pub fn rotation(axis: UnitVec3, angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        let (x, y, z) = (axis.x(), axis.y(), axis.z());
        let t = 1.0 - c;
        Mat3([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    /// Rotation about the world vertical.
    pub fn rotation_z(angle: f64) -> Mat3 {
        Self::rotation(UnitVec3(UP), angle)
    }

    /// Largest deviation of `self·selfᵀ` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.mul_mat(&self.transpose());
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((p.0[i][j] - target).abs());
            }
        }
        err
    }
}

/// Roll-free eye coordinate frame anchored at the eye midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EyeFrame {
    pub origin: Vec3,
    pub ex: UnitVec3,
    pub ey: UnitVec3,
    pub ez: UnitVec3,
}

impl EyeFrame {
    /// Matrix with the frame axes as rows; maps world directions into the frame.
    pub fn matrix(&self) -> Mat3 {
        Mat3::from_rows(self.ex.0, self.ey.0, self.ez.0)
    }

    pub fn to_eye(&self, world_dir: UnitVec3) -> UnitVec3 {
        // Rows are orthonormal, so the image keeps unit length up to rounding.
        let v = self.matrix().mul_vec(world_dir.0);
        v.normalized().unwrap_or(UnitVec3(v))
    }

    pub fn to_world(&self, eye_dir: UnitVec3) -> UnitVec3 {
        let v = self.matrix().transpose().mul_vec(eye_dir.0);
        v.normalized().unwrap_or(UnitVec3(v))
    }
}

/// Builds the eye frame for an eye midpoint at `p_e` (camera at the origin).
pub fn build_eye_frame(p_e: Vec3) -> Result<EyeFrame> {
    if !p_e.is_finite() || p_e.horizontal_norm() <= MIN_HORIZONTAL_DISTANCE {
        return Err(Error::DegenerateEyePosition);
    }
    let ez = p_e.normalized().ok_or(Error::DegenerateEyePosition)?;
    let ex = UP.cross(ez.0).normalized().ok_or(Error::DegenerateEyePosition)?;
    // Ez and Ex are orthonormal, so their cross product is already unit length.
    let ey = UnitVec3(ez.0.cross(ex.0));
    Ok(EyeFrame { origin: p_e, ex, ey, ez })
}

/// Unit gaze from the eye at `p_e` towards the target `p_t`, in eye coordinates.
pub fn gaze_in_eye_coords(p_t: Vec3, p_e: Vec3) -> Result<UnitVec3> {
    let g_l = p_t - p_e;
    if !g_l.is_finite() || g_l.norm() <= MIN_TARGET_DISTANCE {
        return Err(Error::CoincidentTargetAndEye);
    }
    let frame = build_eye_frame(p_e)?;
    let dir = g_l.normalized().ok_or(Error::CoincidentTargetAndEye)?;
    Ok(frame.to_eye(dir))
}

/// Yaw/pitch gaze angles in radians, with an optional quantile offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalGaze {
    pub yaw: f64,
    pub pitch: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl SphericalGaze {
    pub fn new(yaw: f64, pitch: f64) -> Self {
        Self { yaw, pitch, sigma: None }
    }

    pub fn with_sigma(yaw: f64, pitch: f64, sigma: f64) -> Self {
        Self { yaw, pitch, sigma: Some(sigma) }
    }

    /// Maps yaw into (−π, π] and clamps pitch to [−π/2, π/2].
    pub fn canonical(self) -> Self {
        Self {
            yaw: wrap_angle(self.yaw),
            pitch: self.pitch.clamp(-PI / 2.0, PI / 2.0),
            sigma: self.sigma,
        }
    }

    pub fn in_range(&self) -> bool {
        self.yaw > -PI
            && self.yaw <= PI
            && self.pitch.abs() <= PI / 2.0
            && self.sigma.is_none_or(|s| s >= 0.0)
    }

    pub fn to_unit(self) -> UnitVec3 {
        from_spherical(self)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Converts an eye-frame gaze vector to (yaw, pitch).
///
/// Yaw is `atan2(gx, −gz)`, which agrees with `−atan(gx/gz)` whenever the
/// subject faces the camera (`gz < 0`) and covers the full circle otherwise.
/// At the poles yaw is undefined and reported as 0.
pub fn to_spherical(g: UnitVec3) -> SphericalGaze {
    let pitch = g.y().clamp(-1.0, 1.0).asin();
    let yaw = if g.x().hypot(g.z()) < 1e-15 { 0.0 } else { wrap_angle(g.x().atan2(-g.z())) };
    SphericalGaze::new(yaw, pitch)
}

pub fn from_spherical(s: SphericalGaze) -> UnitVec3 {
    let (sy, cy) = s.yaw.sin_cos();
    let (sp, cp) = s.pitch.sin_cos();
    UnitVec3(Vec3::new(cp * sy, sp, -cp * cy))
}

/// Angle between two directions, degrees.
pub fn angular_error(g1: UnitVec3, g2: UnitVec3) -> f64 {
    // atan2 form stays accurate for nearly parallel vectors.
    let (a, b) = (g1.as_vec(), g2.as_vec());
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// Angular error between two spherical gazes, degrees.
pub fn spherical_error(a: SphericalGaze, b: SphericalGaze) -> f64 {
    angular_error(from_spherical(a), from_spherical(b))
}

/// Horizontal mirror of a gaze: yaw flips sign.
pub fn mirror_gaze(s: SphericalGaze) -> SphericalGaze {
    SphericalGaze { yaw: if s.yaw == PI { PI } else { -s.yaw }, ..s }
}
