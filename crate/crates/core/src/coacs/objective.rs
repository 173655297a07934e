//! The translated healing objective `φ(Y*) = f(Y⁰ + Y*) - f(Y⁰) + h(Y⁰ + Y*) - h(Y⁰)`.
//!
//! `Y` is the windowed intensity. The data term `f` is the relaxed Poisson
//! likelihood of the counts `k` given the unwindowed intensity `Y / w²`, with
//! the barrier widened to `l / w²`: per pixel `ρ_{l/w²}(Y / w²; k / r)`, which
//! equals `ρ_l(Y; w² k / r) / w²` up to a constant and is evaluated in that
//! form. Beamstop pixels do not contribute. The support term is
//! `h(Y) = Σ Q |A|²` with `A` the autocorrelation estimate (inverse transform
//! of `Y`) and `Q` the tapered penalty outside the autocorrelation support,
//! with plateau `penalty / l`.

use num_complex::Complex64;

use super::rho::{rho_change, rho_derivative};
use super::solver::{Evaluated, SmoothObjective};
use crate::error::{invalid, Error, Result};
use crate::fft::RealFft2;
use crate::grid::{ifftshift, RealGrid, SupportMask};
use crate::kahan::CompensatedSum;
use crate::support::taper_weights;
use crate::window::{hann_window, WindowPair, WINDOW_FLOOR};

/// Everything the solver needs to know about one pattern.
#[derive(Clone, Debug)]
pub struct HealProblem {
    /// Observed photon counts `B`.
    pub counts: RealGrid,
    /// Pixels without data.
    pub beamstop: SupportMask,
    pub window: WindowPair,
    /// Autocorrelation support, centered.
    pub acsupport: SupportMask,
    /// Penalty taper around `acsupport` with unit plateau, centered.
    pub penalty_taper: RealGrid,
    /// Translation offset `Y⁰` (windowed intensity).
    pub y0: RealGrid,
    /// Quantum efficiency.
    pub r: f64,
}

impl HealProblem {
    /// Builds the problem with the default window floor, a penalty taper of
    /// `taper_width` pixels and `Y⁰ = w² max(B / r, y_floor)`.
    pub fn new(
        counts: RealGrid,
        beamstop: SupportMask,
        acsupport: SupportMask,
        r: f64,
        taper_width: usize,
        y_floor: f64,
    ) -> Result<Self> {
        let n = counts.n();
        beamstop.ensure_same_size(n, "beamstop")?;
        acsupport.ensure_same_size(n, "autocorrelation support")?;
        if !(r > 0.0) {
            return invalid(format!("quantum efficiency must be positive, got {r}"));
        }
        if acsupport.count() == 0 {
            return invalid("autocorrelation support is empty");
        }
        for (idx, (&k, &bs)) in counts.as_slice().iter().zip(beamstop.as_slice()).enumerate() {
            if !bs && !(k >= 0.0 && k.is_finite()) {
                return invalid(format!("count at ({}, {}) is {k}", idx / n, idx % n));
            }
        }
        let window = hann_window(n, WINDOW_FLOOR)?;
        let penalty_taper = taper_weights(&acsupport, taper_width, 1.0)?;
        let y0 = RealGrid::from_fn(n, |i, j| window.intensity[(i, j)] * (counts[(i, j)] / r).max(y_floor));
        Ok(Self {
            counts,
            beamstop,
            window,
            acsupport,
            penalty_taper,
            y0,
            r,
        })
    }

    pub fn n(&self) -> usize {
        self.counts.n()
    }

    /// Windowed expected counts `w² B / r`, zero on the beamstop.
    pub fn windowed_counts(&self) -> Vec<f64> {
        self.counts
            .as_slice()
            .iter()
            .zip(self.window.intensity.as_slice())
            .zip(self.beamstop.as_slice())
            .map(|((&k, &w2), &bs)| if bs { 0.0 } else { w2 * k / self.r })
            .collect()
    }
}

/// Which terms an [`Objective`] includes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Terms {
    Both,
    DataOnly,
    PenaltyOnly,
}

/// Cached autocorrelation data of an evaluated point. Both fields are
/// affine in `Y*`, so extrapolated points can be formed without transforms.
#[derive(Clone, Debug)]
pub struct TransformCache {
    /// Half spectrum of `Y*`; the autocorrelation is its conjugate over `n²`.
    acorr: Vec<Complex64>,
    /// Gradient of `h` at `Y⁰ + Y*`.
    penalty_grad: Vec<f64>,
}

/// The translated objective at a fixed barrier `l` and offset `Y⁰`.
pub struct Objective {
    n: usize,
    barrier: f64,
    terms: Terms,
    offset: Vec<f64>,
    kappa: Vec<f64>,
    /// `1 / w²`.
    data_weight: Vec<f64>,
    active: Vec<bool>,
    /// Point-symmetrized penalty weights over `n⁴` on the half spectrum.
    weights: Vec<f64>,
    /// `weights` times the number of full-plane frequencies each entry stands for.
    sum_weights: Vec<f64>,
    /// Same multiplicities with unit weight, for energy sums.
    multiplicity: Vec<f64>,
    offset_acorr: Vec<Complex64>,
    fft: RealFft2,
    buf: Vec<Complex64>,
}

impl Objective {
    /// `penalty` is the plateau numerator: the weight outside the taper is
    /// `penalty / l`.
    pub fn new(problem: &HealProblem, barrier: f64, penalty: f64, offset: Vec<f64>, terms: Terms) -> Result<Self> {
        if !(barrier > 0.0) || !barrier.is_finite() {
            return invalid(format!("barrier must be positive, got {barrier}"));
        }
        let n = problem.n();
        if offset.len() != n * n {
            return invalid("offset does not match the problem size");
        }
        let nf = n as f64;
        let scale = penalty / barrier / (nf * nf * nf * nf);
        let q = ifftshift(n, problem.penalty_taper.as_slice());
        let mut fft = RealFft2::new(n)?;
        let len = fft.spectrum_len();
        let (mut weights, mut sum_weights, mut multiplicity) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for k in 0..len {
            let (u, v) = fft.frequency(k);
            let mirror = ((n - u) % n) * n + (n - v) % n;
            // only the symmetric part of Q acts on a real Y
            let w = 0.5 * (q[u * n + v] + q[mirror]) * scale;
            let m = fft.multiplicity(v);
            weights[k] = w;
            sum_weights[k] = w * m;
            multiplicity[k] = m;
        }
        let mut offset_acorr = vec![Complex64::new(0.0, 0.0); len];
        fft.forward(&offset, &mut offset_acorr);
        Ok(Self {
            n,
            barrier,
            terms,
            kappa: problem.windowed_counts(),
            data_weight: problem
                .window
                .intensity
                .as_slice()
                .iter()
                .map(|&w2| 1.0 / w2)
                .collect(),
            active: problem.beamstop.as_slice().iter().map(|&b| !b).collect(),
            weights,
            sum_weights,
            multiplicity,
            offset,
            offset_acorr,
            fft,
            buf: vec![Complex64::new(0.0, 0.0); len],
        })
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn barrier(&self) -> f64 {
        self.barrier
    }

    fn uses_data(&self) -> bool {
        self.terms != Terms::PenaltyOnly
    }

    fn uses_penalty(&self) -> bool {
        self.terms != Terms::DataOnly
    }

    /// Data term change and gradient at `Y⁰ + y`.
    fn data_term(&self, y: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        let l = self.barrier;
        for idx in 0..y.len() {
            if !self.active[idx] {
                grad[idx] = 0.0;
                continue;
            }
            let base = self.offset[idx];
            let k = self.kappa[idx];
            let c = self.data_weight[idx];
            let change = c * rho_change(base, y[idx], k, l);
            let g = c * rho_derivative(base + y[idx], k, l);
            if !change.is_finite() || !g.is_finite() {
                return Err(Error::NumericFailure {
                    row: idx / self.n,
                    col: idx % self.n,
                    detail: format!("data term is {change}, derivative {g}"),
                });
            }
            acc.add(change);
            grad[idx] = g;
        }
        Ok(acc.value())
    }

    /// `h(Y⁰ + y) - h(Y⁰)` from the transform of `y`.
    fn penalty_change(&self, acorr: &[Complex64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for ((&q, a), a0) in self.sum_weights.iter().zip(acorr).zip(&self.offset_acorr) {
            if q == 0.0 {
                continue;
            }
            acc.add(q * (2.0 * (a0.re * a.re + a0.im * a.im) + a.norm_sqr()));
        }
        acc.value()
    }

    fn finish(&self, y: Vec<f64>, acorr: Vec<Complex64>, penalty_grad: Vec<f64>) -> Result<Evaluated<TransformCache>> {
        let mut grad = vec![0.0; y.len()];
        let data = if self.uses_data() {
            self.data_term(&y, &mut grad)?
        } else {
            0.0
        };
        let penalty = if self.uses_penalty() {
            for (g, p) in grad.iter_mut().zip(&penalty_grad) {
                *g += p;
            }
            self.penalty_change(&acorr)
        } else {
            0.0
        };
        let value = data + penalty;
        if !value.is_finite() {
            return Err(Error::NumericFailure {
                row: 0,
                col: 0,
                detail: format!("objective is {value} (data {data}, penalty {penalty})"),
            });
        }
        Ok(Evaluated {
            y,
            value,
            grad,
            cache: TransformCache { acorr, penalty_grad },
        })
    }

    /// Full evaluation at `Y⁰ + y`, the representation used by tests and the driver.
    pub fn eval_grid(&mut self, ystar: &RealGrid) -> Result<(f64, RealGrid)> {
        let p = self.evaluate(ystar.as_slice().to_vec())?;
        Ok((p.value, RealGrid::from_vec(self.n, p.grad)?))
    }

    /// Fraction of autocorrelation energy of `Y⁰ + y` outside the
    /// autocorrelation support, i.e. wherever the penalty acts.
    pub fn leakage(&self, p: &Evaluated<TransformCache>) -> f64 {
        let (mut out, mut total) = (CompensatedSum::new(), CompensatedSum::new());
        for (((&q, &m), a), a0) in self
            .weights
            .iter()
            .zip(&self.multiplicity)
            .zip(&p.cache.acorr)
            .zip(&self.offset_acorr)
        {
            let e = m * (a + a0).norm_sqr();
            total.add(e);
            if q > 0.0 {
                out.add(e);
            }
        }
        let t = total.value();
        if t > 0.0 {
            out.value() / t
        } else {
            0.0
        }
    }
}

impl SmoothObjective for Objective {
    type Cache = TransformCache;

    fn evaluate(&mut self, y: Vec<f64>) -> Result<Evaluated<TransformCache>> {
        let nn = self.n * self.n;
        if y.len() != nn {
            return invalid("point does not match the problem size");
        }
        if !self.uses_penalty() {
            return self.finish(y, Vec::new(), Vec::new());
        }
        let mut acorr = vec![Complex64::new(0.0, 0.0); self.buf.len()];
        self.fft.forward(&y, &mut acorr);
        // ∇h = (2 / n⁴) Re(F^H (Q ⊙ F(Y))), a real inverse transform of a Hermitian spectrum
        for ((b, &q), (a, a0)) in self.buf.iter_mut().zip(&self.weights).zip(acorr.iter().zip(&self.offset_acorr)) {
            *b = (a + a0) * q;
        }
        let mut penalty_grad = vec![0.0; nn];
        self.fft.inverse_unnormalized(&self.buf, &mut penalty_grad);
        for g in penalty_grad.iter_mut() {
            *g *= 2.0;
        }
        self.finish(y, acorr, penalty_grad)
    }

    fn extrapolate(
        &mut self,
        x: &Evaluated<TransformCache>,
        prev: &Evaluated<TransformCache>,
        beta: f64,
    ) -> Result<Evaluated<TransformCache>> {
        let lerp = |a: f64, b: f64| a + beta * (a - b);
        let y = x.y.iter().zip(&prev.y).map(|(&a, &b)| lerp(a, b)).collect();
        if !self.uses_penalty() {
            return self.finish(y, Vec::new(), Vec::new());
        }
        let acorr = x
            .cache
            .acorr
            .iter()
            .zip(&prev.cache.acorr)
            .map(|(&a, &b)| a + (a - b) * beta)
            .collect();
        let penalty_grad = x
            .cache
            .penalty_grad
            .iter()
            .zip(&prev.cache.penalty_grad)
            .map(|(&a, &b)| lerp(a, b))
            .collect();
        self.finish(y, acorr, penalty_grad)
    }
}

/// Translated data term `f(Y⁰ + Y*) - f(Y⁰)` and its gradient.
pub fn data_objective(ystar: &RealGrid, problem: &HealProblem, barrier: f64) -> Result<(f64, RealGrid)> {
    ystar.ensure_same_size(problem.n(), "Y*")?;
    let mut obj = Objective::new(problem, barrier, 0.0, problem.y0.as_slice().to_vec(), Terms::DataOnly)?;
    obj.eval_grid(ystar)
}

/// Translated support penalty `h(Y⁰ + Y*) - h(Y⁰)` with plateau
/// `penalty / barrier`, and its gradient.
pub fn support_penalty(ystar: &RealGrid, problem: &HealProblem, barrier: f64, penalty: f64) -> Result<(f64, RealGrid)> {
    ystar.ensure_same_size(problem.n(), "Y*")?;
    let mut obj = Objective::new(problem, barrier, penalty, problem.y0.as_slice().to_vec(), Terms::PenaltyOnly)?;
    obj.eval_grid(ystar)
}
