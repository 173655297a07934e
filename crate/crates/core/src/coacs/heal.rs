//! Continuation driver: a decreasing barrier schedule (outer loop) with
//! re-translated warm restarts inside each barrier value (inner rounds).

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::objective::{HealProblem, Objective, Terms};
use super::solver::{solve_inner, InnerOptions, Preconditioned, SmoothObjective, SolverState, SolverStats};
use crate::error::{invalid, Result};
use crate::grid::{RealGrid, SupportMask};
use crate::kahan;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HealConfig {
    pub l_init: f64,
    pub l_factor: f64,
    pub l_min: f64,
    /// Support penalty numerator; the plateau weight is `penalty_base / l`.
    pub penalty_base: f64,
    pub outer_accel: f64,
    pub inner_accel: f64,
    pub inner_iters: usize,
    /// Inner rounds stop once `|Δφ| · l` falls below this.
    pub tol: f64,
    pub max_backtracks: usize,
    pub max_inner_rounds: usize,
    pub taper_width: usize,
    pub quantum_efficiency: f64,
}

impl Default for HealConfig {
    fn default() -> Self {
        Self {
            l_init: 4.0,
            l_factor: 0.5,
            l_min: 2f64.powi(-46),
            penalty_base: 5e7,
            outer_accel: 0.5,
            inner_accel: 0.9,
            inner_iters: 2000,
            tol: 1e-9,
            max_backtracks: 60,
            max_inner_rounds: 5,
            taper_width: 5,
            quantum_efficiency: 1.0,
        }
    }
}

impl HealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_factor > 0.0 && self.l_factor < 1.0) {
            return invalid("l_factor must lie in (0, 1)");
        }
        if !(self.l_min > 0.0 && self.l_min <= self.l_init) {
            return invalid("need 0 < l_min <= l_init");
        }
        for (name, a) in [("outer_accel", self.outer_accel), ("inner_accel", self.inner_accel)] {
            if !(0.0..1.0).contains(&a) {
                return invalid(format!("{name} must lie in [0, 1)"));
            }
        }
        if !(self.tol > 0.0) {
            return invalid("tol must be positive");
        }
        if self.inner_iters == 0 || self.max_inner_rounds == 0 {
            return invalid("iteration budgets must be positive");
        }
        if !(self.penalty_base >= 0.0) {
            return invalid("penalty_base must be non-negative");
        }
        Ok(())
    }

    /// Barrier values `l_init, l_init·f, …` down to `l_min` (inclusive,
    /// up to rounding).
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut l = self.l_init;
        while l >= self.l_min * (1.0 - 1e-12) {
            out.push(l);
            l *= self.l_factor;
        }
        out
    }
}

/// Convergence record of one barrier value.
#[derive(Clone, Debug, Serialize)]
pub struct OuterRecord {
    pub outer_index: usize,
    pub l: f64,
    pub inner_rounds: usize,
    /// Objective change over this barrier value, relative to its start point.
    pub objective: f64,
    /// Fraction of autocorrelation energy on the penalty plateau.
    pub leakage: f64,
    pub outer_extrapolated: bool,
    pub accepted_inner_extrapolations: usize,
    pub rejected_inner_extrapolations: usize,
    /// Inner rounds whose end point had a higher objective than the previous one.
    pub endpoint_increases: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct HealOutput {
    /// Healed windowed intensities.
    pub windowed: RealGrid,
    /// Healed intensities with the window divided out.
    pub unwindowed: RealGrid,
    pub log: Vec<OuterRecord>,
    pub stats: SolverStats,
    pub warnings: Vec<String>,
}

impl HealOutput {
    pub fn endpoint_increases(&self) -> usize {
        self.log.iter().map(|r| r.endpoint_increases).sum()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    kahan::sum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y))).sqrt()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn extrapolate(last: &[f64], before: &[f64], factor: f64) -> Vec<f64> {
    last.iter().zip(before).map(|(&a, &b)| a + factor * (a - b)).collect()
}

/// Heals `counts` against the autocorrelation support `acsupport`.
pub fn heal(counts: &RealGrid, beamstop: &SupportMask, acsupport: &SupportMask, config: &HealConfig) -> Result<HealOutput> {
    config.validate()?;
    let problem = HealProblem::new(
        counts.clone(),
        beamstop.clone(),
        acsupport.clone(),
        config.quantum_efficiency,
        config.taper_width,
        config.l_init,
    )?;
    heal_problem(&problem, config)
}

/// Heals a prepared problem, starting from its offset `Y⁰`.
pub fn heal_problem(problem: &HealProblem, config: &HealConfig) -> Result<HealOutput> {
    config.validate()?;
    let n = problem.n();
    let nn = n * n;
    let inner = InnerOptions {
        budget: config.inner_iters,
        max_backtracks: config.max_backtracks,
        ..InnerOptions::default()
    };

    let mut current = problem.y0.as_slice().to_vec();
    let mut older: Option<Vec<f64>> = None;
    let mut lipschitz = 1.0 / config.l_init;
    let mut stats = SolverStats::default();
    let mut log = Vec::new();
    let mut warnings = Vec::new();

    for (outer_index, &l) in config.schedule().iter().enumerate() {
        if outer_index > 0 {
            lipschitz /= config.l_factor;
        }
        // Outer extrapolation from the last two barrier end points, kept only
        // if it does not worsen the objective at this barrier.
        let mut start = current.clone();
        let mut outer_extrapolated = false;
        if outer_index > 2 && config.outer_accel > 0.0 {
            if let Some(prev) = &older {
                let guess = extrapolate(&current, prev, config.outer_accel);
                let mut probe = Objective::new(problem, l, config.penalty_base, current.clone(), Terms::Both)?;
                let step: Vec<f64> = guess.iter().zip(&current).map(|(g, c)| g - c).collect();
                if probe.evaluate(step)?.value <= 0.0 {
                    start = guess;
                    outer_extrapolated = true;
                }
            }
        }

        let mut endpoints: Vec<Vec<f64>> = vec![start];
        let mut objective_total = kahan::CompensatedSum::new();
        let mut record = OuterRecord {
            outer_index,
            l,
            inner_rounds: 0,
            objective: 0.0,
            leakage: 0.0,
            outer_extrapolated,
            accepted_inner_extrapolations: 0,
            rejected_inner_extrapolations: 0,
            endpoint_increases: 0,
            converged: false,
        };
        let mut leakage = 0.0;

        for round in 0..config.max_inner_rounds {
            let last = endpoints.last().expect("start point").clone();
            let mut objective = Objective::new(problem, l, config.penalty_base, last.clone(), Terms::Both)?;

            let accelerated_start = if endpoints.len() >= 3 && config.inner_accel > 0.0 {
                let before = &endpoints[endpoints.len() - 2];
                Some(last.iter().zip(before).map(|(&a, &b)| config.inner_accel * (a - b)).collect::<Vec<f64>>())
            } else {
                None
            };

            // Steps are taken in z with Y* = w ⊙ z, i.e. gradients scaled by w².
            let mut scaled = Preconditioned::new(&mut objective, problem.window.amp.as_slice().to_vec())?;
            let mut result = None;
            if let Some(step) = accelerated_start {
                let state = SolverState::new(scaled.to_outer(&step), lipschitz);
                let (state, end) = solve_inner(&mut scaled, state, &inner)?;
                // distances are measured in Y*, relative to `last`
                let to_last = distance(&end.cache.y, &vec![0.0; nn]);
                let to_start = distance(&end.cache.y, &step);
                if to_last < to_start || end.value > 0.0 {
                    record.rejected_inner_extrapolations += 1;
                    stats.absorb(&state.stats);
                } else {
                    record.accepted_inner_extrapolations += 1;
                    result = Some((state, end));
                }
            }
            let (state, end) = match result {
                Some(r) => r,
                None => solve_inner(&mut scaled, SolverState::new(vec![0.0; nn], lipschitz), &inner)?,
            };
            let end = end.cache;
            stats.absorb(&state.stats);
            lipschitz = state.lipschitz;
            record.inner_rounds = round + 1;

            let change = end.value;
            if change > 0.0 {
                record.endpoint_increases += 1;
                warn!("objective increased by {change:e} at l = {l:e}, round {round}");
            }
            objective_total.add(change);
            leakage = objective.leakage(&end);
            endpoints.push(add(&last, &end.y));
            if endpoints.len() > 3 {
                endpoints.remove(0);
            }
            debug!("l = {l:e} round {round}: Δφ = {change:e}, leakage {leakage:e}, L = {lipschitz:e}");
            if change.abs() * l < config.tol {
                record.converged = true;
                break;
            }
        }
        if !record.converged {
            let msg = format!(
                "barrier l = {l:e} not converged after {} inner rounds",
                config.max_inner_rounds
            );
            warn!("{msg}");
            warnings.push(msg);
        }
        record.objective = objective_total.value();
        record.leakage = leakage;
        log.push(record);

        older = Some(std::mem::replace(&mut current, endpoints.pop().expect("end point")));
    }

    let windowed = RealGrid::from_vec(n, current)?;
    let unwindowed = problem.window.unwindow(&windowed);
    Ok(HealOutput {
        windowed,
        unwindowed,
        log,
        stats,
        warnings,
    })
}
