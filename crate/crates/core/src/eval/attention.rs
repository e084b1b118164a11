//! Shelf attention maps from gaze rays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_eye_frame, from_spherical, gaze_in_eye_coords, to_spherical, SphericalGaze, UnitVec3, Vec3, UP};
use crate::rng::{self, tag};

/// A planar grid of `rows × cols` cells centered on `point`.
///
/// Columns run along the horizontal in-plane axis `UP × normal`; rows run
/// upwards. Cell (0, 0) is the bottom-left seen from the front.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttentionGrid {
    pub point: Vec3,
    /// Facing direction of the shelf front.
    pub normal: Vec3,
    pub rows: usize,
    pub cols: usize,
    pub cell_width: f64,
    pub cell_height: f64,
}

impl Default for AttentionGrid {
    fn default() -> Self {
        Self {
            point: Vec3::new(2.5, 0.0, -0.4),
            normal: Vec3::new(-1.0, 0.0, 0.0),
            rows: 4,
            cols: 6,
            cell_width: 0.25,
            cell_height: 0.25,
        }
    }
}

/// Validated grid with its in-plane basis.
#[derive(Clone, Copy, Debug)]
pub struct GridFrame {
    pub grid: AttentionGrid,
    pub normal: UnitVec3,
    pub u: Vec3,
    pub v: Vec3,
}

impl AttentionGrid {
    pub fn frame(&self) -> Result<GridFrame> {
        let ok = self.rows > 0
            && self.cols > 0
            && self.cell_width > 0.0
            && self.cell_height > 0.0
            && self.point.is_finite()
            && self.cell_width.is_finite()
            && self.cell_height.is_finite();
        let normal = self.normal.normalized().filter(|_| ok).ok_or(Error::DegeneratePlane)?;
        let n = normal.as_vec();
        let u = UP.cross(n).normalized().map(UnitVec3::as_vec).unwrap_or(Vec3::new(1.0, 0.0, 0.0));
        let v = n.cross(u);
        Ok(GridFrame { grid: *self, normal, u, v })
    }
}

impl GridFrame {
    /// World position of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> Vec3 {
        let g = &self.grid;
        let s = (col as f64 + 0.5 - g.cols as f64 / 2.0) * g.cell_width;
        let t = (row as f64 + 0.5 - g.rows as f64 / 2.0) * g.cell_height;
        g.point + self.u * s + self.v * t
    }

    /// Cell hit by a ray, if any. Rays parallel to the plane, pointing away
    /// from it, or landing outside the grid miss.
    pub fn hit(&self, ray: &GazeRay) -> Option<(usize, usize)> {
        let n = self.normal.as_vec();
        let denom = ray.direction.as_vec().dot(n);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (self.grid.point - ray.origin).dot(n) / denom;
        if !(t > 0.0) {
            return None;
        }
        let rel = ray.origin + ray.direction.as_vec() * t - self.grid.point;
        let g = &self.grid;
        let s = rel.dot(self.u) / g.cell_width + g.cols as f64 / 2.0;
        let r = rel.dot(self.v) / g.cell_height + g.rows as f64 / 2.0;
        if s < 0.0 || r < 0.0 || s >= g.cols as f64 || r >= g.rows as f64 {
            return None;
        }
        Some((r as usize, s as usize))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeRay {
    pub origin: Vec3,
    pub direction: UnitVec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major hit counts.
    pub counts: Vec<u64>,
    pub hits: usize,
    pub misses: usize,
    /// Fraction of labeled rays landing in their labeled cell.
    pub accuracy: Option<f64>,
}

impl AttentionMap {
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,count\n");
        for r in 0..self.rows {
            for c in 0..self.cols {
                s.push_str(&format!("{r},{c},{}\n", self.get(r, c)));
            }
        }
        s
    }
}

/// Bins ray–plane intersections into grid cells. With `labels`, also
/// scores how often the hit cell equals the labeled one.
pub fn attention_map(rays: &[GazeRay], grid: &AttentionGrid, labels: Option<&[(usize, usize)]>) -> Result<AttentionMap> {
    let frame = grid.frame()?;
    if let Some(l) = labels {
        if l.len() != rays.len() {
            return Err(Error::LengthMismatch(rays.len(), l.len()));
        }
    }
    let mut counts = vec![0u64; grid.rows * grid.cols];
    let (mut hits, mut misses, mut correct) = (0, 0, 0);
    for (i, ray) in rays.iter().enumerate() {
        if !(ray.origin.is_finite() && ray.direction.as_vec().is_finite()) {
            return Err(Error::Config(format!("non-finite ray {i}")));
        }
        match frame.hit(ray) {
            Some((r, c)) => {
                hits += 1;
                counts[r * grid.cols + c] += 1;
                if labels.is_some_and(|l| l[i] == (r, c)) {
                    correct += 1;
                }
            }
            None => misses += 1,
        }
    }
    let accuracy = labels.filter(|l| !l.is_empty()).map(|l| correct as f64 / l.len() as f64);
    Ok(AttentionMap { rows: grid.rows, cols: grid.cols, counts, hits, misses, accuracy })
}

#[derive(Clone, Debug)]
pub struct ShopperSample {
    /// Eye position, world frame.
    pub eye: Vec3,
    pub label: (usize, usize),
    /// Gaze at the labeled cell center in the eye frame.
    pub gaze: SphericalGaze,
}

/// Shoppers standing 0.8–2 m in front of the shelf, each fixating a random
/// cell center.
pub fn simulate_shoppers(grid: &AttentionGrid, n: usize, seed: u64) -> Result<Vec<ShopperSample>> {
    let frame = grid.frame()?;
    let mut rng = rng::stream(seed, &[tag::ATTENTION]);
    let n_vec = frame.normal.as_vec();
    let half_w = grid.cols as f64 * grid.cell_width / 2.0;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        use rand::Rng as _;
        let depth = rng.random_range(0.8..2.0);
        let lateral = rng.random_range(-half_w..half_w);
        let height = rng.random_range(-0.1..0.3);
        let label = (rng.random_range(0..grid.rows), rng.random_range(0..grid.cols));
        let eye = grid.point + n_vec * depth + frame.u * lateral + frame.v * height;
        let Ok(g) = gaze_in_eye_coords(frame.cell_center(label.0, label.1), eye) else { continue };
        out.push(ShopperSample { eye, label, gaze: to_spherical(g) });
    }
    Ok(out)
}

/// World-frame ray for an eye-frame gaze estimate at `eye`.
pub fn world_ray(eye: Vec3, gaze: SphericalGaze) -> Result<GazeRay> {
    let f = build_eye_frame(eye)?;
    Ok(GazeRay { origin: eye, direction: f.to_world(from_spherical(gaze)) })
}
