//! Mollweide equal-area projection of gaze directions.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{Error, Result};

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

/// Half-width of the projected ellipse.
pub const X_MAX: f64 = 2.0 * SQRT_2;
/// Half-height of the projected ellipse.
pub const Y_MAX: f64 = SQRT_2;

/// Auxiliary angle α solving `2α + sin 2α = π sin φ`.
pub fn auxiliary_angle(pitch: f64) -> Result<f64> {
    let target = PI * pitch.sin();
    if pitch.abs() >= FRAC_PI_2 {
        return Ok(FRAC_PI_2.copysign(pitch));
    }
    // Near the poles f'(α) → 0; start from the cubic expansion
    // 2α + sin 2α ≈ π − (4/3)δ³ with δ = π/2 − |α|.
    let s = pitch.sin().abs();
    let mut a = if s > 0.9 {
        (FRAC_PI_2 - (0.75 * PI * (1.0 - s)).cbrt()).copysign(pitch)
    } else {
        pitch
    };
    for _ in 0..NEWTON_MAX_ITER {
        let f = 2.0 * a + (2.0 * a).sin() - target;
        let df = 2.0 + 2.0 * (2.0 * a).cos();
        if df == 0.0 {
            return Ok(a);
        }
        let step = f / df;
        a = (a - step).clamp(-FRAC_PI_2, FRAC_PI_2);
        if step.abs() < NEWTON_TOL {
            return Ok(a);
        }
    }
    Err(Error::NoConvergence)
}

/// Projects (yaw, pitch) onto the plane; yaw maps to x, pitch to y.
pub fn mollweide_project(yaw: f64, pitch: f64) -> Result<(f64, f64)> {
    let a = auxiliary_angle(pitch)?;
    Ok((2.0 * SQRT_2 / PI * yaw * a.cos(), SQRT_2 * a.sin()))
}
