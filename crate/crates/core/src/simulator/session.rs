use std::f64::consts::PI;

use rand::Rng as _;
use rayon::prelude::*;

use super::trajectory::build_trajectory;
use super::{observe, FrameRecord, HeadPose, SessionConfig};
use crate::acquisition::{MarkerObservation, PixelRay, SubjectDetection};
use crate::error::{Error, Result};
use crate::geometry::{from_spherical, gaze_in_eye_coords, to_spherical, wrap_angle, Vec3};
use crate::rng::{self, tag};

/// Largest number of subjects per session; subject ids are `session * 1000 + index`.
pub const MAX_SUBJECTS: usize = 1000;

/// Latent state of one subject at one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubjectState {
    /// Eye midpoint, world frame.
    pub position: Vec3,
    /// Head orientation in the eye frame, rad.
    pub head_yaw: f64,
    pub head_pitch: f64,
    pub eye_in_head_yaw: f64,
    pub eye_in_head_pitch: f64,
    /// Head angular speed, rad/s.
    pub head_speed: f64,
    /// True while the subject holds a "freeze".
    pub frozen: bool,
}

/// Output of one session: records and the latent states that produced them.
#[derive(Clone, Debug)]
pub struct SimulatedSession {
    pub session_id: u32,
    pub loop_radius: f64,
    pub records: Vec<FrameRecord>,
    /// `states[i]` produced `records[i]`.
    pub states: Vec<SubjectState>,
}

struct Subject {
    id: u32,
    eye: Vec3,
    feet: Vec3,
    hip: Vec3,
}

fn place_subjects(cfg: &SessionConfig, session_id: u32) -> Vec<Subject> {
    let mut rng = rng::stream(cfg.seed, &[tag::SUBJECTS, session_id as u64]);
    let [d_lo, d_hi] = cfg.subject_distance_range;
    let base = 2.0 * PI * rng.random::<f64>();
    let n = cfg.n_subjects;
    let ratios = cfg.body_ratios;
    (0..n)
        .map(|j| {
            // u^(2/3) skews the distance towards the far end (mean at 60 % of the range).
            let dist = d_lo + (d_hi - d_lo) * rng.random::<f64>().powf(2.0 / 3.0);
            let az = base + 2.0 * PI * j as f64 / n as f64 + 0.3 * rng::normal(&mut rng);
            let stature = (cfg.subjects.stature_mean + cfg.subjects.stature_sd * rng::normal(&mut rng))
                .clamp(1.4, 2.1);
            let ground = Vec3::new(az.cos() * dist, az.sin() * dist, -cfg.camera_height);
            Subject {
                id: session_id * MAX_SUBJECTS as u32 + j as u32,
                eye: ground + Vec3::new(0.0, 0.0, ratios.eye_height_ratio * stature),
                feet: ground,
                hip: ground + Vec3::new(0.0, 0.0, ratios.hip_height_ratio * stature),
            }
        })
        .collect()
}

/// Simulates one capture session. Deterministic in `(cfg, session_id)`.
pub fn simulate_session(cfg: &SessionConfig, session_id: u32) -> Result<SimulatedSession> {
    cfg.validate()?;
    if cfg.n_subjects > MAX_SUBJECTS {
        return Err(Error::Config(format!("at most {MAX_SUBJECTS} subjects per session")));
    }
    let subjects = place_subjects(cfg, session_id);
    let max_dist = subjects.iter().map(|s| s.eye.horizontal_norm()).fold(0.0, f64::max);
    let mut traj_rng = rng::stream(cfg.seed, &[tag::TRAJECTORY, session_id as u64]);
    let trajectory = build_trajectory(cfg, &mut traj_rng, max_dist);
    let phase_offset = 2.0 * cfg.move_freeze_period * traj_rng.random::<f64>();

    let noise = &cfg.noise;
    let mut marker_rng = rng::stream(cfg.seed, &[tag::DETECTION, session_id as u64, u64::MAX]);
    let markers: Vec<MarkerObservation> = trajectory
        .samples
        .iter()
        .map(|s| {
            let rot = rng::small_rotation(&mut marker_rng, noise.marker_rot_deg.to_radians());
            let dt = Vec3::new(
                rng::normal(&mut marker_rng),
                rng::normal(&mut marker_rng),
                rng::normal(&mut marker_rng),
            ) * noise.marker_trans_m;
            MarkerObservation {
                rotation: rot.mul_mat(&s.pose.rotation),
                translation: s.pose.translation + dt,
            }
        })
        .collect();

    let dt = 1.0 / cfg.fps;
    let follow = 1.0 - (-dt / cfg.subjects.head_lag_s).exp();
    let limit = cfg.subjects.eye_in_head_limit_deg.to_radians();
    let kp_sigma = noise.keypoint_deg.to_radians();
    let feet_min = cfg.subjects.feet_min_elevation_deg.to_radians();

    let mut records = Vec::new();
    let mut states = Vec::new();
    for (j, subj) in subjects.iter().enumerate() {
        let mut det_rng = rng::stream(cfg.seed, &[tag::DETECTION, session_id as u64, j as u64]);
        let mut obs_rng = rng::stream(cfg.seed, &[tag::OBSERVATION, session_id as u64, j as u64]);
        let eye_true = PixelRay::towards(subj.eye).expect("subject away from camera");
        let feet_true = PixelRay::towards(subj.feet).expect("subject away from camera");
        let hip_true = PixelRay::towards(subj.hip).expect("subject away from camera");
        let feet_visible = feet_true.direction.elevation() >= feet_min;

        let mut head: Option<(f64, f64)> = None;
        for (k, sample) in trajectory.samples.iter().enumerate() {
            // Detection draws happen every frame to keep streams aligned.
            let eye_ray = rng::perturb_direction(&mut det_rng, eye_true.direction, kp_sigma);
            let feet_ray = rng::perturb_direction(&mut det_rng, feet_true.direction, kp_sigma);
            let hip_ray = rng::perturb_direction(&mut det_rng, hip_true.direction, kp_sigma);

            let Ok(g) = gaze_in_eye_coords(sample.cross, subj.eye) else {
                head = None;
                continue;
            };
            let gaze = to_spherical(g);
            let moving = ((sample.t + phase_offset) / cfg.move_freeze_period).floor() as i64 % 2 == 0;
            let (prev_yaw, prev_pitch) = head.unwrap_or((gaze.yaw, gaze.pitch * cfg.subjects.head_pitch_gain));
            let (mut hy, mut hp) = (prev_yaw, prev_pitch);
            if moving {
                hy = wrap_angle(hy + follow * wrap_angle(gaze.yaw - hy));
                hp += follow * (cfg.subjects.head_pitch_gain * gaze.pitch - hp);
            }
            let mut frozen = !moving;
            let mut ey = wrap_angle(gaze.yaw - hy);
            let mut ep = gaze.pitch - hp;
            if ey.abs() > limit {
                ey = ey.clamp(-limit, limit);
                hy = wrap_angle(gaze.yaw - ey);
                frozen = false;
            }
            if ep.abs() > limit {
                ep = ep.clamp(-limit, limit);
                hp = gaze.pitch - ep;
                frozen = false;
            }
            let head_speed = match head {
                Some((py, pp)) => {
                    let a = from_spherical(crate::geometry::SphericalGaze::new(py, pp));
                    let b = from_spherical(crate::geometry::SphericalGaze::new(hy, hp));
                    a.dot(b).clamp(-1.0, 1.0).acos() / dt
                }
                None => 0.0,
            };
            head = Some((hy, hp));

            let state = SubjectState {
                position: subj.eye,
                head_yaw: hy,
                head_pitch: hp,
                eye_in_head_yaw: ey,
                eye_in_head_pitch: ep,
                head_speed,
                frozen,
            };
            let features = observe(&state, gaze, noise, &mut obs_rng);
            if (sample.cross - subj.eye).norm() < cfg.subjects.min_target_distance {
                continue;
            }
            let visible = features[super::feature::VISIBLE] > 0.5;
            records.push(FrameRecord {
                session_id,
                subject_id: subj.id,
                frame_index: k as u32,
                timestamp: sample.t,
                detection: SubjectDetection {
                    subject_id: subj.id,
                    eye_ray: PixelRay::new(eye_ray),
                    feet_ray: feet_visible.then_some(PixelRay::new(feet_ray)),
                    hip_ray: Some(PixelRay::new(hip_ray)),
                },
                marker: markers[k],
                features,
                gt_gaze: gaze,
                gt_head: HeadPose { yaw: hy, pitch: hp },
                visible,
            });
            states.push(state);
        }
    }
    Ok(SimulatedSession { session_id, loop_radius: trajectory.loop_radius, records, states })
}

/// Simulates sessions `0..n_sessions` in parallel; output order is by session id.
pub fn simulate_sessions(cfg: &SessionConfig, n_sessions: u32) -> Result<Vec<SimulatedSession>> {
    (0..n_sessions).into_par_iter().map(|s| simulate_session(cfg, s)).collect()
}
