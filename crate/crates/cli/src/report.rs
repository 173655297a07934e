//! R-factor tables over the three processing variants.

use std::path::Path;

use anyhow::{bail, Context, Result};
use coacs_core::metrics::mean_std;
use coacs_core::{r_factor, radial_r_factor, RealGrid};

pub const RAW_PHASED: &str = "raw-phased";
pub const HEALED_PHASED: &str = "healed-phased";
pub const HEALED_DIRECT: &str = "healed-direct";
pub const VARIANTS: [&str; 3] = [RAW_PHASED, HEALED_PHASED, HEALED_DIRECT];

#[derive(Clone, Debug)]
pub struct VariantScores {
    pub variant: String,
    /// `(pattern, R)` in pattern order.
    pub per_pattern: Vec<(usize, f64)>,
    pub mean: f64,
    pub std: f64,
    pub radii: Vec<usize>,
    pub pixels: Vec<usize>,
    pub mean_truth: Vec<f64>,
    /// Mean and standard deviation over patterns of each shell's R; `None`
    /// where the true amplitudes vanish on the shell.
    pub shell_mean: Vec<Option<f64>>,
    pub shell_std: Vec<Option<f64>>,
}

impl VariantScores {
    pub fn compute(variant: &str, truth: &RealGrid, recovered: &[(usize, RealGrid)], shells: Option<usize>) -> Result<Self> {
        if recovered.is_empty() {
            bail!("no reconstructions for {variant}");
        }
        let mut per_pattern = Vec::new();
        let mut profiles = Vec::new();
        for (k, amp) in recovered {
            let r = r_factor(amp, truth, None).with_context(|| format!("{variant}, pattern {k}"))?;
            per_pattern.push((*k, r));
            profiles.push(radial_r_factor(amp, truth, shells)?);
        }
        let (mean, std) = mean_std(&per_pattern.iter().map(|p| p.1).collect::<Vec<_>>());
        let first = &profiles[0];
        let mut shell_mean = Vec::new();
        let mut shell_std = Vec::new();
        for s in 0..first.radii.len() {
            let vals: Vec<f64> = profiles.iter().filter_map(|p| p.r_factors[s]).collect();
            if vals.is_empty() {
                shell_mean.push(None);
                shell_std.push(None);
            } else {
                let (m, sd) = mean_std(&vals);
                shell_mean.push(Some(m));
                shell_std.push(Some(sd));
            }
        }
        Ok(Self {
            variant: variant.to_string(),
            per_pattern,
            mean,
            std,
            radii: first.radii.clone(),
            pixels: first.counts.clone(),
            mean_truth: first.mean_truth.clone(),
            shell_mean,
            shell_std,
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

/// One row per pattern and variant plus a `mean` row carrying σ over patterns.
pub fn write_table(path: &Path, scores: &[VariantScores]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["variant", "pattern", "r", "sigma"])?;
    for s in scores {
        for (k, r) in &s.per_pattern {
            w.write_record([s.variant.clone(), k.to_string(), format!("{r:.9e}"), String::new()])?;
        }
        w.write_record([s.variant.clone(), "mean".into(), format!("{:.9e}", s.mean), format!("{:.9e}", s.std)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_shells(path: &Path, scores: &[VariantScores]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["variant", "radius", "pixels", "mean_true_amplitude", "r", "sigma"])?;
    for s in scores {
        for i in 0..s.radii.len() {
            w.write_record([
                s.variant.clone(),
                s.radii[i].to_string(),
                s.pixels[i].to_string(),
                format!("{:.9e}", s.mean_truth[i]),
                opt(s.shell_mean[i]),
                opt(s.shell_std[i]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Radius of the first local minimum of the shell-mean true amplitude
/// beyond `from`, ignoring shells at or past the inscribed circle.
pub fn first_signal_minimum(mean_truth: &[f64], from: usize, n: usize) -> Option<usize> {
    let limit = (n / 2).min(mean_truth.len().saturating_sub(1));
    (from.max(1)..limit).find(|&s| mean_truth[s] < mean_truth[s - 1] && mean_truth[s] <= mean_truth[s + 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let truth = RealGrid::filled(8, 1.0);
        let rec = vec![(0, RealGrid::filled(8, 1.5)), (1, RealGrid::filled(8, 0.5))];
        let s = VariantScores::compute(HEALED_DIRECT, &truth, &rec, None).unwrap();
        assert!((s.mean - 0.5).abs() < 1e-15 && s.std.abs() < 1e-15);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_table(&p, &[s.clone()]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "variant,pattern,r,sigma");
        assert!(lines[3].starts_with("healed-direct,mean,5.0"));
        let q = dir.path().join("s.csv");
        write_shells(&q, &[s]).unwrap();
        let rows = std::fs::read_to_string(&q).unwrap().lines().count();
        assert_eq!(rows, 1 + shells_of(8));
    }

    fn shells_of(n: usize) -> usize {
        coacs_core::metrics::shell_index(n, 0, 0) + 1
    }

    #[test]
    fn finds_first_minimum() {
        let m = [9.0, 5.0, 2.0, 1.0, 3.0, 4.0, 0.5, 6.0, 7.0, 8.0];
        assert_eq!(first_signal_minimum(&m, 0, 20), Some(3));
        assert_eq!(first_signal_minimum(&m, 4, 20), Some(6));
        assert_eq!(first_signal_minimum(&m, 0, 8), Some(3));
        assert_eq!(first_signal_minimum(&m, 0, 6), None);
    }
}
