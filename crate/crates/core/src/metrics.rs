//! Crystallographic R factors over wave amplitudes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{center, RealGrid, SupportMask};
use crate::kahan::CompensatedSum;

/// `Σ | |a_rec| - |a_true| | / Σ |a_true|` over `region` (all pixels when `None`).
pub fn r_factor(recovered: &RealGrid, truth: &RealGrid, region: Option<&SupportMask>) -> Result<f64> {
    let n = truth.n();
    recovered.ensure_same_size(n, "recovered amplitudes")?;
    if let Some(m) = region {
        m.ensure_same_size(n, "region")?;
    }
    let (mut num, mut den) = (CompensatedSum::new(), CompensatedSum::new());
    for idx in 0..n * n {
        if region.is_some_and(|m| !m.as_slice()[idx]) {
            continue;
        }
        let t = truth.as_slice()[idx].abs();
        num.add((recovered.as_slice()[idx].abs() - t).abs());
        den.add(t);
    }
    let den = den.value();
    if !(den > 0.0) {
        return Err(Error::UndefinedMetric("true amplitudes vanish over the region".into()));
    }
    Ok(num.value() / den)
}

/// Per-shell R factors; shell `s` holds the pixels whose distance to the
/// grid center rounds to `s`.
#[derive(Clone, Debug, Serialize)]
pub struct RadialProfile {
    pub radii: Vec<usize>,
    /// `None` where the true amplitudes vanish on the whole shell.
    pub r_factors: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
    /// Mean true amplitude per shell.
    pub mean_truth: Vec<f64>,
}

pub fn shell_index(n: usize, i: usize, j: usize) -> usize {
    let c = center(n) as f64;
    let (dy, dx) = (i as f64 - c, j as f64 - c);
    (dx * dx + dy * dy).sqrt().round() as usize
}

/// Radial R-factor profile. With `n_shells = Some(k)` only the first `k`
/// shells are reported.
pub fn radial_r_factor(recovered: &RealGrid, truth: &RealGrid, n_shells: Option<usize>) -> Result<RadialProfile> {
    let n = truth.n();
    recovered.ensure_same_size(n, "recovered amplitudes")?;
    let shells = shell_index(n, 0, 0).max(shell_index(n, n - 1, n - 1)).max(shell_index(n, 0, n - 1)) + 1;
    let mut num = vec![CompensatedSum::new(); shells];
    let mut den = vec![CompensatedSum::new(); shells];
    let mut counts = vec![0usize; shells];
    for i in 0..n {
        for j in 0..n {
            let s = shell_index(n, i, j);
            let t = truth[(i, j)].abs();
            num[s].add((recovered[(i, j)].abs() - t).abs());
            den[s].add(t);
            counts[s] += 1;
        }
    }
    let keep = n_shells.unwrap_or(shells).min(shells);
    let numerators: Vec<f64> = num.iter().take(keep).map(|s| s.value()).collect();
    let denominators: Vec<f64> = den.iter().take(keep).map(|s| s.value()).collect();
    let r_factors = numerators
        .iter()
        .zip(&denominators)
        .map(|(&a, &b)| if b > 0.0 { Some(a / b) } else { None })
        .collect();
    let mean_truth = denominators
        .iter()
        .zip(&counts)
        .map(|(&d, &c)| if c > 0 { d / c as f64 } else { 0.0 })
        .collect();
    counts.truncate(keep);
    Ok(RadialProfile {
        radii: (0..keep).collect(),
        r_factors,
        counts,
        numerators,
        denominators,
        mean_truth,
    })
}

/// Mean and (population) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    (mean, var.sqrt())
}
