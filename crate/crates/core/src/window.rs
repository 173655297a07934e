//! Separable Hann window with an additive floor.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::grid::RealGrid;

/// Additive floor applied to the amplitude window before squaring.
pub const WINDOW_FLOOR: f64 = 1e-3;

/// Amplitude-space window and its intensity-space square.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowPair {
    pub amp: RealGrid,
    pub intensity: RealGrid,
}

impl WindowPair {
    pub fn n(&self) -> usize {
        self.amp.n()
    }

    /// Divides a windowed intensity grid by the intensity window.
    pub fn unwindow(&self, windowed: &RealGrid) -> RealGrid {
        windowed.zip_map(&self.intensity, |y, w2| y / w2)
    }

    pub fn apply(&self, intensity: &RealGrid) -> RealGrid {
        intensity.zip_map(&self.intensity, |y, w2| y * w2)
    }
}

/// Symmetric 1D Hann taper: zero at both ends, one in the middle.
pub fn hann_1d(n: usize) -> Vec<f64> {
    let denom = (n - 1) as f64;
    (0..n)
        .map(|m| 0.5 * (1.0 - (2.0 * PI * m as f64 / denom).cos()))
        .collect()
}

pub fn hann_window(n: usize, floor: f64) -> Result<WindowPair> {
    if n < 2 {
        return invalid(format!("Hann window needs n >= 2, got {n}"));
    }
    if !(floor >= 0.0) || !floor.is_finite() {
        return invalid(format!("window floor must be a non-negative number, got {floor}"));
    }
    let h = hann_1d(n);
    let amp = RealGrid::from_fn(n, |i, j| h[i] * h[j] + floor);
    let intensity = amp.map(|a| a * a);
    Ok(WindowPair { amp, intensity })
}
