//! SVG figures: gaze distribution maps and yaw curves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::attention::AttentionMap;
use super::metrics::YawBin;
use super::mollweide::{mollweide_project, X_MAX, Y_MAX};
use crate::error::{Error, Result};
use crate::geometry::SphericalGaze;

/// Counts over a regular grid covering the Mollweide ellipse's bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram2d {
    pub cols: usize,
    pub rows: usize,
    /// Row-major, row 0 at the top (positive pitch).
    pub counts: Vec<u64>,
}

impl Histogram2d {
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn lit_cells(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Column range `(min, max)` of non-empty cells.
    pub fn column_extent(&self) -> Option<(usize, usize)> {
        let cols: Vec<usize> =
            (0..self.counts.len()).filter(|&i| self.counts[i] > 0).map(|i| i % self.cols).collect();
        Some((*cols.iter().min()?, *cols.iter().max()?))
    }
}

pub fn distribution_histogram(samples: &[SphericalGaze], cols: usize, rows: usize) -> Result<Histogram2d> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cols == 0 || rows == 0 {
        return Err(Error::Config("histogram needs at least one cell".into()));
    }
    let mut counts = vec![0u64; cols * rows];
    for s in samples {
        let (x, y) = mollweide_project(s.yaw, s.pitch)?;
        let c = (((x + X_MAX) / (2.0 * X_MAX) * cols as f64) as usize).min(cols - 1);
        let r = (((Y_MAX - y) / (2.0 * Y_MAX) * rows as f64) as usize).min(rows - 1);
        counts[r * cols + c] += 1;
    }
    Ok(Histogram2d { cols, rows, counts })
}

const BACKGROUND: &str = "#f4f4f4";

/// Dark blue (low) to yellow (high).
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(30.0, 253.0), lerp(40.0, 231.0), lerp(120.0, 37.0))
}

/// Renders a histogram with logarithmic intensity; empty cells keep the
/// background color.
pub fn distribution_svg(h: &Histogram2d) -> String {
    let scale = 100.0;
    let (w, ht) = (2.0 * X_MAX * scale, 2.0 * Y_MAX * scale);
    let (cw, ch) = (w / h.cols as f64, ht / h.rows as f64);
    let lmax = (1.0 + h.max() as f64).ln();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{ht:.1}" viewBox="0 0 {w:.1} {ht:.1}">"#
    );
    let _ = writeln!(
        s,
        r##"<ellipse cx="{:.1}" cy="{:.1}" rx="{:.1}" ry="{:.1}" fill="{BACKGROUND}" stroke="#888888"/>"##,
        w / 2.0,
        ht / 2.0,
        w / 2.0,
        ht / 2.0
    );
    for r in 0..h.rows {
        for c in 0..h.cols {
            let n = h.get(r, c);
            if n == 0 {
                continue;
            }
            let t = if lmax > 0.0 { (1.0 + n as f64).ln() / lmax } else { 0.0 };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="{}"/>"#,
                c as f64 * cw,
                r as f64 * ch,
                ramp(t)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the log-intensity Mollweide map of `samples`.
pub fn export_distribution_map(samples: &[SphericalGaze], out_path: &Path) -> Result<Histogram2d> {
    let h = distribution_histogram(samples, 72, 36)?;
    fs::write(out_path, distribution_svg(&h)).map_err(|e| Error::io(out_path, e))?;
    Ok(h)
}

/// Mean error (solid) and mean σ (dashed) against yaw.
pub fn yaw_curve_svg(bins: &[YawBin]) -> String {
    let (w, h, pad) = (720.0, 360.0, 40.0);
    let ymax = bins
        .iter()
        .flat_map(|b| [b.mean_error_deg, b.mean_sigma_deg.unwrap_or(0.0)])
        .fold(1.0f64, f64::max)
        * 1.1;
    let px = |yaw: f64| pad + (yaw + 180.0) / 360.0 * (w - 2.0 * pad);
    let py = |v: f64| h - pad - v / ymax * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<path d="M{pad} {} H{} M{pad} {} V{pad}" stroke="#000000" fill="none"/>"##,
        h - pad,
        w - pad,
        h - pad
    );
    for tick in [-180, -90, 0, 90, 180] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{tick}</text>"#,
            px(tick as f64),
            h - pad + 16.0
        );
    }
    let _ = writeln!(s, r#"<text x="{pad}" y="{:.1}" font-size="12">{ymax:.1} deg</text>"#, pad - 8.0);
    let line = |vals: Vec<(f64, f64)>| {
        vals.iter()
            .enumerate()
            .map(|(i, (x, y))| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, px(*x), py(*y)))
            .collect::<String>()
    };
    let err: Vec<(f64, f64)> = bins.iter().map(|b| (b.center_deg, b.mean_error_deg)).collect();
    if !err.is_empty() {
        let _ = writeln!(s, r##"<path d="{}" stroke="#1f4e9c" stroke-width="2" fill="none"/>"##, line(err));
    }
    let sig: Vec<(f64, f64)> = bins.iter().filter_map(|b| b.mean_sigma_deg.map(|v| (b.center_deg, v))).collect();
    if !sig.is_empty() {
        let _ = writeln!(
            s,
            r##"<path d="{}" stroke="#c0392b" stroke-width="2" stroke-dasharray="6 4" fill="none"/>"##,
            line(sig)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_yaw_curve_svg(path: &Path, bins: &[YawBin]) -> Result<()> {
    fs::write(path, yaw_curve_svg(bins)).map_err(|e| Error::io(path, e))
}

/// Shelf heatmap, linear intensity, bottom row drawn last.
pub fn attention_svg(m: &AttentionMap) -> String {
    let cell = 60.0;
    let (w, h) = (m.cols as f64 * cell, m.rows as f64 * cell);
    let max = m.counts.iter().copied().max().unwrap_or(0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    for r in 0..m.rows {
        for c in 0..m.cols {
            let n = m.get(r, c);
            let fill = if n == 0 { BACKGROUND.to_string() } else { ramp(n as f64 / max as f64) };
            let y = (m.rows - 1 - r) as f64 * cell;
            let _ = writeln!(
                s,
                r##"<rect x="{:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="{fill}" stroke="#ffffff"/>"##,
                c as f64 * cell
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{n}</text>"#,
                (c as f64 + 0.5) * cell,
                y + cell / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
