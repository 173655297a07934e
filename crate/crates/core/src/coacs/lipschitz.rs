//! Local Lipschitz estimates for the step-size backtracking.
//!
//! Two estimates of the gradient's Lipschitz constant along a step `Δ` are
//! available. The aggressive one uses function values,
//! `2 (f_new - f_prev - <g_prev, Δ>) / |Δ|²`, and suffers from cancellation
//! when `f_new ≈ f_prev`. The conservative one uses only gradients,
//! `<g_new - g_prev, Δ> / |Δ|²`. The choice is made before a step is
//! accepted, from both the function-value change and the step length, and
//! is re-made on every step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kahan::{self, CompensatedSum};

/// Relative threshold below which a difference is considered unreliable.
pub const RELATIVE_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundMode {
    Aggressive,
    Conservative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate {
    /// The selected estimate.
    pub value: f64,
    pub mode: BoundMode,
    pub aggressive: f64,
    pub conservative: f64,
    /// `<g_prev, Δ>`
    pub directional: f64,
    /// `|Δ|²`
    pub step_sq: f64,
}

impl LipschitzEstimate {
    /// Whether `f_new <= f_prev + <g_prev, Δ> + L/2 |Δ|²` holds for `lipschitz`,
    /// up to a relative rounding allowance.
    pub fn majorized_by(&self, lipschitz: f64, f_prev: f64, f_new: f64) -> bool {
        let bound = f_prev + self.directional + 0.5 * lipschitz * self.step_sq;
        let slack = 1e-10 * (1.0 + f_prev.abs() + f_new.abs() + (0.5 * lipschitz * self.step_sq).abs());
        f_new <= bound + slack
    }
}

fn norm(v: &[f64]) -> f64 {
    kahan::sum(v.iter().map(|x| x * x)).sqrt()
}

pub fn lipschitz_policy(
    prev: &[f64],
    new: &[f64],
    f_prev: f64,
    f_new: f64,
    g_prev: &[f64],
    g_new: &[f64],
) -> Result<LipschitzEstimate> {
    debug_assert!(prev.len() == new.len() && g_prev.len() == new.len() && g_new.len() == new.len());
    let (mut dd, mut gd, mut dgd) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for i in 0..prev.len() {
        let d = new[i] - prev[i];
        dd.add(d * d);
        gd.add(g_prev[i] * d);
        dgd.add((g_new[i] - g_prev[i]) * d);
    }
    let step_sq = dd.value();
    if step_sq == 0.0 {
        return Err(Error::DegenerateStep);
    }
    let aggressive = 2.0 * (f_new - f_prev - gd.value()) / step_sq;
    let conservative = dgd.value() / step_sq;

    let flat = (f_new - f_prev).abs() <= RELATIVE_EPS * (f_new.abs() + f_prev.abs());
    let short = !flat && step_sq.sqrt() <= RELATIVE_EPS * (norm(prev) + norm(new));
    let (value, mode) = if flat || short {
        (conservative, BoundMode::Conservative)
    } else {
        (aggressive, BoundMode::Aggressive)
    };
    Ok(LipschitzEstimate {
        value,
        mode,
        aggressive,
        conservative,
        directional: gd.value(),
        step_sq,
    })
}
