//! Subject-disjoint dataset splits, temporal windows and the JSON-lines format.
//!
//! One record per line with the keys `session_id, subject_id, frame_index, t,
//! features, gt_yaw, gt_pitch, head_yaw, head_pitch, visible, detections`.
//! `detections` holds `eye_ray`, `feet_ray` and `hip_ray` (3 components or
//! `null`), `marker_rotation` (9 reals, row-major) and `marker_translation`.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{FrameRecord, HeadPose, SimulatedSession};
use crate::acquisition::{MarkerObservation, PixelRay, SubjectDetection};
use crate::error::{Error, Result};
use crate::geometry::{Mat3, SphericalGaze, UnitVec3, Vec3};
use crate::rng::{self, tag};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const VAL_FILE: &str = "val.jsonl";
pub const TEST_FILE: &str = "test.jsonl";

#[derive(Serialize, Deserialize)]
struct WireDetections {
    eye_ray: [f64; 3],
    feet_ray: Option<[f64; 3]>,
    hip_ray: Option<[f64; 3]>,
    marker_rotation: [f64; 9],
    marker_translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    session_id: u32,
    subject_id: u32,
    frame_index: u32,
    t: f64,
    features: Vec<f64>,
    gt_yaw: f64,
    gt_pitch: f64,
    head_yaw: f64,
    head_pitch: f64,
    visible: u8,
    detections: WireDetections,
}

fn ray(a: [f64; 3]) -> Result<PixelRay> {
    UnitVec3::new_preserving(Vec3::from_array(a))
        .map(PixelRay::new)
        .ok_or_else(|| Error::Config("zero-length ray in dataset".into()))
}

impl From<&FrameRecord> for WireRecord {
    fn from(r: &FrameRecord) -> Self {
        let d = &r.detection;
        WireRecord {
            session_id: r.session_id,
            subject_id: r.subject_id,
            frame_index: r.frame_index,
            t: r.timestamp,
            features: r.features.clone(),
            gt_yaw: r.gt_gaze.yaw,
            gt_pitch: r.gt_gaze.pitch,
            head_yaw: r.gt_head.yaw,
            head_pitch: r.gt_head.pitch,
            visible: r.visible as u8,
            detections: WireDetections {
                eye_ray: d.eye_ray.direction.as_vec().to_array(),
                feet_ray: d.feet_ray.map(|p| p.direction.as_vec().to_array()),
                hip_ray: d.hip_ray.map(|p| p.direction.as_vec().to_array()),
                marker_rotation: r.marker.rotation.to_row_major(),
                marker_translation: r.marker.translation.to_array(),
            },
        }
    }
}

impl TryFrom<WireRecord> for FrameRecord {
    type Error = Error;
    fn try_from(w: WireRecord) -> Result<Self> {
        let d = w.detections;
        Ok(FrameRecord {
            session_id: w.session_id,
            subject_id: w.subject_id,
            frame_index: w.frame_index,
            timestamp: w.t,
            detection: SubjectDetection {
                subject_id: w.subject_id,
                eye_ray: ray(d.eye_ray)?,
                feet_ray: d.feet_ray.map(ray).transpose()?,
                hip_ray: d.hip_ray.map(ray).transpose()?,
            },
            marker: MarkerObservation {
                rotation: Mat3::from_row_major(&d.marker_rotation),
                translation: Vec3::from_array(d.marker_translation),
            },
            features: w.features,
            gt_gaze: SphericalGaze::new(w.gt_yaw, w.gt_pitch),
            gt_head: HeadPose { yaw: w.head_yaw, pitch: w.head_pitch },
            visible: w.visible != 0,
        })
    }
}

pub fn write_jsonl(path: &Path, records: &[FrameRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, &WireRecord::from(r))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<FrameRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let w: WireRecord = serde_json::from_str(&line)?;
        out.push(w.try_into()?);
    }
    Ok(out)
}

/// Records of one split, ordered by stream, with the centers of every full
/// temporal window.
#[derive(Clone, Debug, Default)]
pub struct Split {
    records: Vec<FrameRecord>,
    centers: Vec<usize>,
    half: usize,
}

impl Split {
    /// Sorts records by (session, subject, frame) and indexes every frame
    /// whose `window` neighbourhood is an unbroken run of frames.
    pub fn new(mut records: Vec<FrameRecord>, window: usize) -> Result<Self> {
        if window == 0 || window % 2 == 0 {
            return Err(Error::Config(format!("window must be odd, got {window}")));
        }
        records.sort_by_key(|r| (r.session_id, r.subject_id, r.frame_index));
        let half = window / 2;
        let same_run = |a: &FrameRecord, b: &FrameRecord, gap: usize| {
            a.session_id == b.session_id
                && a.subject_id == b.subject_id
                && (b.frame_index - a.frame_index) as usize == gap
        };
        let centers = (half..records.len().saturating_sub(half))
            .filter(|&c| same_run(&records[c - half], &records[c + half], 2 * half))
            .collect();
        Ok(Self { records, centers, half })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn window_len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn window(&self, i: usize) -> &[FrameRecord] {
        let c = self.centers[i];
        &self.records[c - self.half..=c + self.half]
    }

    pub fn center(&self, i: usize) -> &FrameRecord {
        &self.records[self.centers[i]]
    }

    /// Feature rows of window `i`.
    pub fn window_features(&self, i: usize) -> Vec<&[f64]> {
        self.window(i).iter().map(|r| r.features.as_slice()).collect()
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn subject_ids(&self) -> BTreeSet<u32> {
        self.records.iter().map(|r| r.subject_id).collect()
    }

    pub fn targets(&self) -> Vec<SphericalGaze> {
        (0..self.len()).map(|i| self.center(i).gt_gaze).collect()
    }
}

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Split,
    pub val: Split,
    pub test: Split,
    pub window: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.75, val: 0.10, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!("split ratios must be non-negative and sum to 1: {self:?}")));
        }
        Ok(())
    }
}

/// Assigns whole subjects to train/val/test.
pub fn split_sessions(
    sessions: &[SimulatedSession],
    ratios: SplitRatios,
    window: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    ratios.validate()?;
    let mut ids: Vec<u32> = sessions
        .iter()
        .flat_map(|s| s.records.iter().map(|r| r.subject_id))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = ids.len();
    if n < 3 {
        return Err(Error::TooFewSubjects(n));
    }
    ids.shuffle(&mut rng::stream(seed, &[tag::SPLIT]));
    let n_val = ((n as f64 * ratios.val).round() as usize).max(1);
    let n_test = ((n as f64 * ratios.test).round() as usize).max(1);
    let n_val = n_val.min(n - 2);
    let n_test = n_test.min(n - 1 - n_val);
    let val_ids: BTreeSet<u32> = ids[..n_val].iter().copied().collect();
    let test_ids: BTreeSet<u32> = ids[n_val..n_val + n_test].iter().copied().collect();

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for r in sessions.iter().flat_map(|s| s.records.iter()) {
        if val_ids.contains(&r.subject_id) {
            val.push(r.clone());
        } else if test_ids.contains(&r.subject_id) {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok(DatasetSplit {
        train: Split::new(train, window)?,
        val: Split::new(val, window)?,
        test: Split::new(test, window)?,
        window,
    })
}

/// Splits by subject and writes `train.jsonl`, `val.jsonl` and `test.jsonl` into `out_dir`.
pub fn export_dataset(
    sessions: &[SimulatedSession],
    ratios: SplitRatios,
    window: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetSplit> {
    let split = split_sessions(sessions, ratios, window, seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_jsonl(&out_dir.join(TRAIN_FILE), split.train.records())?;
    write_jsonl(&out_dir.join(VAL_FILE), split.val.records())?;
    write_jsonl(&out_dir.join(TEST_FILE), split.test.records())?;
    Ok(split)
}

/// Reads one JSON-lines split file into windows.
pub fn load_split(path: &Path, window: usize) -> Result<Split> {
    Split::new(read_jsonl(path)?, window)
}

/// Reads a directory written by [`export_dataset`].
pub fn load_dataset(dir: &Path, window: usize) -> Result<DatasetSplit> {
    Ok(DatasetSplit {
        train: load_split(&dir.join(TRAIN_FILE), window)?,
        val: load_split(&dir.join(VAL_FILE), window)?,
        test: load_split(&dir.join(TEST_FILE), window)?,
        window,
    })
}
