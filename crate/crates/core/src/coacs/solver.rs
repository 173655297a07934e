//! Accelerated gradient method with adaptive Lipschitz backtracking and
//! no-regress restarts, for smooth convex objectives.

use serde::Serialize;

use super::lipschitz::{lipschitz_policy, BoundMode, LipschitzEstimate};
use crate::error::{invalid, Error, Result};

/// A point together with its objective value, gradient and any
/// objective-specific data that is affine in the point.
#[derive(Clone, Debug)]
pub struct Evaluated<C> {
    pub y: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub cache: C,
}

pub trait SmoothObjective {
    type Cache: Clone;

    fn evaluate(&mut self, y: Vec<f64>) -> Result<Evaluated<Self::Cache>>;

    /// Evaluates `x + beta (x - prev)`. Objectives whose expensive parts are
    /// affine may override this to avoid recomputation.
    fn extrapolate(
        &mut self,
        x: &Evaluated<Self::Cache>,
        prev: &Evaluated<Self::Cache>,
        beta: f64,
    ) -> Result<Evaluated<Self::Cache>> {
        let y = x.y.iter().zip(&prev.y).map(|(&a, &b)| a + beta * (a - b)).collect();
        self.evaluate(y)
    }
}

/// Diagonal change of variables `y = s ⊙ z`: the wrapped objective is seen
/// as a function of `z`, so gradient steps in `z` are steps in `y` scaled by
/// `s²`. The cache keeps the wrapped evaluation in `y` coordinates.
pub struct Preconditioned<'a, O> {
    objective: &'a mut O,
    scale: Vec<f64>,
}

impl<'a, O: SmoothObjective> Preconditioned<'a, O> {
    pub fn new(objective: &'a mut O, scale: Vec<f64>) -> Result<Self> {
        if scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return invalid("preconditioner entries must be positive");
        }
        Ok(Self { objective, scale })
    }

    pub fn to_inner(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.scale).map(|(z, s)| z * s).collect()
    }

    pub fn to_outer(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.scale).map(|(y, s)| y / s).collect()
    }

    fn wrap(&self, z: Vec<f64>, inner: Evaluated<O::Cache>) -> Evaluated<Evaluated<O::Cache>> {
        let grad = inner.grad.iter().zip(&self.scale).map(|(g, s)| g * s).collect();
        Evaluated {
            y: z,
            value: inner.value,
            grad,
            cache: inner,
        }
    }
}

impl<O: SmoothObjective> SmoothObjective for Preconditioned<'_, O> {
    type Cache = Evaluated<O::Cache>;

    fn evaluate(&mut self, z: Vec<f64>) -> Result<Evaluated<Self::Cache>> {
        let inner = self.objective.evaluate(self.to_inner(&z))?;
        Ok(self.wrap(z, inner))
    }

    fn extrapolate(
        &mut self,
        x: &Evaluated<Self::Cache>,
        prev: &Evaluated<Self::Cache>,
        beta: f64,
    ) -> Result<Evaluated<Self::Cache>> {
        let inner = self.objective.extrapolate(&x.cache, &prev.cache, beta)?;
        let z = x.y.iter().zip(&prev.y).map(|(&a, &b)| a + beta * (a - b)).collect();
        Ok(self.wrap(z, inner))
    }
}

#[derive(Clone, Debug)]
pub struct InnerOptions {
    pub budget: usize,
    pub max_backtracks: usize,
    /// Factor applied to the Lipschitz estimate before each step, letting
    /// the step size grow again after conservative phases.
    pub step_growth: f64,
    /// Stop once an accepted step changes the objective by less than
    /// `tol * (1 + |φ|)`. Zero runs the full budget.
    pub tol: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            budget: 2000,
            max_backtracks: 60,
            step_growth: 0.9,
            tol: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub evaluations: usize,
    pub backtracks: usize,
    pub restarts: usize,
    pub conservative_steps: usize,
    /// Accepted steps whose quadratic upper bound did not hold.
    pub majorization_violations: usize,
}

impl SolverStats {
    pub fn absorb(&mut self, other: &SolverStats) {
        self.iterations += other.iterations;
        self.evaluations += other.evaluations;
        self.backtracks += other.backtracks;
        self.restarts += other.restarts;
        self.conservative_steps += other.conservative_steps;
        self.majorization_violations += other.majorization_violations;
    }
}

/// State carried across solver calls.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub ystar: Vec<f64>,
    pub lipschitz: f64,
    pub bound_mode: BoundMode,
    pub stats: SolverStats,
    /// Objective value at the end of each `solve_inner` call.
    pub objective_history: Vec<f64>,
}

impl SolverState {
    pub fn new(ystar: Vec<f64>, lipschitz: f64) -> Self {
        Self {
            ystar,
            lipschitz,
            bound_mode: BoundMode::Aggressive,
            stats: SolverStats::default(),
            objective_history: Vec::new(),
        }
    }
}

fn step_from(y: &[f64], grad: &[f64], lipschitz: f64) -> Vec<f64> {
    y.iter().zip(grad).map(|(&v, &g)| v - g / lipschitz).collect()
}

/// Runs up to `options.budget` accelerated gradient iterations from
/// `state.ystar`. Returns the updated state and the final evaluated point,
/// whose value never exceeds the starting value.
pub fn solve_inner<O: SmoothObjective>(
    objective: &mut O,
    mut state: SolverState,
    options: &InnerOptions,
) -> Result<(SolverState, Evaluated<O::Cache>)> {
    if options.budget == 0 {
        return invalid("iteration budget must be positive");
    }
    if !(state.lipschitz > 0.0) || !state.lipschitz.is_finite() {
        return invalid(format!("Lipschitz estimate must be positive, got {}", state.lipschitz));
    }
    let mut stats = SolverStats::default();
    let mut x = objective.evaluate(std::mem::take(&mut state.ystar))?;
    stats.evaluations += 1;
    let mut x_prev = x.clone();
    let mut theta = 1.0_f64;
    let mut lipschitz = state.lipschitz;

    'outer: for _ in 0..options.budget {
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        let y = if beta > 0.0 {
            stats.evaluations += 1;
            objective.extrapolate(&x, &x_prev, beta)?
        } else {
            x.clone()
        };

        let mut trial = lipschitz * options.step_growth;
        let mut attempts = 0;
        let (candidate, estimate) = loop {
            let cand = objective.evaluate(step_from(&y.y, &y.grad, trial))?;
            stats.evaluations += 1;
            let est: LipschitzEstimate =
                match lipschitz_policy(&y.y, &cand.y, y.value, cand.value, &y.grad, &cand.grad) {
                    Ok(e) => e,
                    Err(Error::DegenerateStep) => break 'outer,
                    Err(e) => return Err(e),
                };
            if !est.value.is_finite() {
                return Err(Error::SolverFailure(format!("non-finite Lipschitz estimate {est:?}")));
            }
            // the selected estimate must fit, and the bound must actually hold
            if est.value <= trial * (1.0 + 1e-12) && est.majorized_by(trial, y.value, cand.value) {
                break (cand, est);
            }
            attempts += 1;
            stats.backtracks += 1;
            if attempts > options.max_backtracks {
                return Err(Error::SolverFailure(format!(
                    "backtracking exhausted after {attempts} attempts (L = {trial:e}, estimate {:e}, mode {:?})",
                    est.value, est.mode
                )));
            }
            trial = (2.0 * trial).max(est.value);
        };
        state.bound_mode = estimate.mode;
        if estimate.mode == BoundMode::Conservative {
            stats.conservative_steps += 1;
        }
        if !estimate.majorized_by(trial, y.value, candidate.value) {
            stats.majorization_violations += 1;
        }
        lipschitz = trial;
        stats.iterations += 1;

        if candidate.value > x.value {
            // no-regress restart: drop the momentum and retry from x
            stats.restarts += 1;
            if beta == 0.0 {
                // a plain step from x went uphill; only rounding can do this
                break;
            }
            theta = 1.0;
            x_prev = x.clone();
            continue;
        }
        let decrease = x.value - candidate.value;
        x_prev = std::mem::replace(&mut x, candidate);
        theta = theta_next;
        if options.tol > 0.0 && decrease <= options.tol * (1.0 + x.value.abs()) {
            break;
        }
    }

    state.lipschitz = lipschitz;
    state.stats.absorb(&stats);
    state.objective_history.push(x.value);
    state.ystar = x.y.clone();
    Ok((state, x))
}
