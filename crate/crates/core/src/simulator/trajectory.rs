use std::f64::consts::PI;

use rand::Rng as _;

use super::SessionConfig;
use crate::acquisition::{cross_position, MarkerObservation};
use crate::geometry::{Mat3, Vec3, UP};
use crate::rng::{self, tag, Rng};

/// Board state at one frame time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoardSample {
    pub t: f64,
    /// Exact board pose (tag origin and orientation).
    pub pose: MarkerObservation,
    /// Exact world position of the fixation cross.
    pub cross: Vec3,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub loop_radius: f64,
    /// Number of frames belonging to the outer loop; the rest is the inner pass.
    pub loop_frames: usize,
    pub samples: Vec<BoardSample>,
}

/// Orientation whose board normal (+z) points horizontally at the camera.
fn facing_camera(position: Vec3) -> Mat3 {
    let horiz = Vec3::new(position.x, position.y, 0.0);
    let normal = (-horiz).normalized().map(|n| n.as_vec()).unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    let up = UP;
    let right = up.cross(normal);
    Mat3::from_cols(right, up, normal)
}

/// Horizontal waypoint path: polyline with arc-length parameterisation.
struct Path {
    loop_len: f64,
    loop_radius: f64,
    start_angle: f64,
    direction: f64,
    legs: Vec<(Vec3, Vec3)>,
}

impl Path {
    fn total_len(&self) -> f64 {
        self.loop_len + self.legs.iter().map(|(a, b)| (*b - *a).norm()).sum::<f64>()
    }

    fn at(&self, s: f64) -> Vec3 {
        if s <= self.loop_len {
            let a = self.start_angle + self.direction * s / self.loop_radius;
            return Vec3::new(a.cos(), a.sin(), 0.0) * self.loop_radius;
        }
        let mut rem = s - self.loop_len;
        for (a, b) in &self.legs {
            let len = (*b - *a).norm();
            if rem <= len {
                return *a + (*b - *a) * (rem / len.max(1e-12));
            }
            rem -= len;
        }
        self.legs.last().map(|l| l.1).unwrap_or(Vec3::ZERO)
    }
}

/// Board path for one session: a full outer loop followed by an inner pass.
///
/// `max_subject_distance` keeps the loop outside the subjects.
pub(crate) fn build_trajectory(cfg: &SessionConfig, rng: &mut Rng, max_subject_distance: f64) -> Trajectory {
    let tc = &cfg.trajectory;
    let [lo, hi] = cfg.loop_radius_range;
    let lo_eff = lo.max(max_subject_distance + tc.loop_clearance).min(hi);
    let loop_radius = lo_eff + (hi - lo_eff) * rng.random::<f64>();
    let start_angle = 2.0 * PI * rng.random::<f64>();
    let direction = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let phase = 2.0 * PI * rng.random::<f64>();

    let end_angle = start_angle + direction * 2.0 * PI;
    let loop_end = Vec3::new(end_angle.cos(), end_angle.sin(), 0.0) * loop_radius;
    let r_in = tc.inner_radius;
    let chord_a = Vec3::new(end_angle.cos(), end_angle.sin(), 0.0) * r_in;
    let b_angle = end_angle + direction * 2.0 * PI / 3.0;
    let chord_b = Vec3::new(b_angle.cos(), b_angle.sin(), 0.0) * r_in;

    let path = Path {
        loop_len: 2.0 * PI * loop_radius,
        loop_radius,
        start_angle,
        direction,
        legs: vec![(loop_end, chord_a), (chord_a, chord_b)],
    };

    let dt = 1.0 / cfg.fps;
    let duration = path.total_len() / tc.walk_speed;
    let n = (duration / dt).floor() as usize + 1;
    let mut samples = Vec::with_capacity(n);
    let mut loop_frames = 0;
    for k in 0..n {
        let t = k as f64 * dt;
        let s = t * tc.walk_speed;
        if s <= path.loop_len {
            loop_frames += 1;
        }
        let mut p = path.at(s);
        p.z = tc.board_height + tc.oscillation_amplitude * (2.0 * PI * t / tc.oscillation_period + phase).sin();
        let pose = MarkerObservation { rotation: facing_camera(p), translation: p };
        samples.push(BoardSample { t, pose, cross: cross_position(&pose, &cfg.board) });
    }
    Trajectory { loop_radius, loop_frames, samples }
}

/// Board path for session `session_id` of `cfg`, without subjects present.
pub fn generate_trajectory(cfg: &SessionConfig, session_id: u32) -> Trajectory {
    let mut rng = rng::stream(cfg.seed, &[tag::TRAJECTORY, session_id as u64]);
    build_trajectory(cfg, &mut rng, cfg.subject_distance_range[1])
}
