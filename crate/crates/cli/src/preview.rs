//! 8-bit grayscale previews written as binary PGM.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use coacs_core::{hann_window, RealGrid};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    Linear,
    /// `log(1 + max(v, 0))`.
    Log,
    /// Divides out the squared Hann window, then log scaling.
    DerootedWindow,
}

/// Smallest squared-window value divided out by [`Scaling::DerootedWindow`].
pub const DEROOT_FLOOR: f64 = 1e-6;

/// Maps `grid` to bytes; the minimum goes to 0 and the maximum to 255, a
/// constant grid to mid-gray.
pub fn render(grid: &RealGrid, scaling: Scaling) -> Result<Vec<u8>> {
    if !grid.all_finite() {
        bail!("grid has non-finite values");
    }
    let values: Vec<f64> = match scaling {
        Scaling::Linear => grid.as_slice().to_vec(),
        Scaling::Log => grid.as_slice().iter().map(|&v| v.max(0.0).ln_1p()).collect(),
        Scaling::DerootedWindow => {
            let w = hann_window(grid.n(), coacs_core::window::WINDOW_FLOOR)?;
            grid.as_slice()
                .iter()
                .zip(w.intensity.as_slice())
                .map(|(&v, &w2)| (v / w2.max(DEROOT_FLOOR)).max(0.0).ln_1p())
                .collect()
        }
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Ok(vec![128; values.len()]);
    }
    Ok(values
        .iter()
        .map(|&v| ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect())
}

pub fn render_preview(grid: &RealGrid, scaling: Scaling, out: &Path) -> Result<()> {
    let pixels = render(grid, scaling)?;
    let n = grid.n();
    let mut bytes = format!("P5\n{n} {n}\n255\n").into_bytes();
    bytes.extend_from_slice(&pixels);
    fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))
}
