//! Reference phase retrieval: hybrid input-output followed by error
//! reduction, with ensembles averaged after registration.
//!
//! Amplitude and mask grids are centered (zero frequency at the grid
//! center); real-space objects are returned centered as well.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fft::{Direction, Fft2};
use crate::grid::{ComplexGrid, RealGrid, SupportMask};
use crate::kahan;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseConfig {
    pub beta: f64,
    pub hio_iters: usize,
    pub er_iters: usize,
    pub replicates: usize,
    pub keep_best: usize,
    /// Side of the centered square real-space support.
    pub support_side: usize,
    pub seed: u64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            hio_iters: 50_000,
            er_iters: 10_000,
            replicates: 100,
            keep_best: 10,
            support_side: 31,
            seed: 1,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return invalid("beta must lie in (0, 1]");
        }
        if self.replicates == 0 || self.keep_best == 0 || self.keep_best > self.replicates {
            return invalid("need 1 <= keep_best <= replicates");
        }
        Ok(())
    }

    pub fn support(&self, n: usize) -> Result<SupportMask> {
        SupportMask::centered_square(n, self.support_side)
    }
}

#[derive(Clone, Debug)]
pub struct PhaseResult {
    /// Final real-space iterate, centered.
    pub real_space: ComplexGrid,
    /// Fourier amplitudes of `real_space`, centered.
    pub amplitudes: RealGrid,
    /// `‖g_F outside support‖ / ‖g_F‖` after the last iteration.
    pub real_space_error: f64,
    pub seed: u64,
}

/// Working buffers for one reconstruction, all in unshifted order.
struct Projector {
    n: usize,
    fft: Fft2,
    amp: Vec<f64>,
    constrained: Vec<bool>,
    support: Vec<bool>,
}

impl Projector {
    fn new(amplitudes: &RealGrid, free_mask: &SupportMask, support: &SupportMask) -> Result<Self> {
        let n = amplitudes.n();
        free_mask.ensure_same_size(n, "free mask")?;
        support.ensure_same_size(n, "support")?;
        if support.count() == 0 {
            return invalid("real-space support is empty");
        }
        if amplitudes.as_slice().iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return invalid("amplitudes must be finite and non-negative");
        }
        Ok(Self {
            n,
            fft: Fft2::new(n)?,
            amp: amplitudes.ifftshift().into_vec(),
            constrained: free_mask.ifftshift().as_slice().iter().map(|&f| !f).collect(),
            support: support.ifftshift().into_vec(),
        })
    }

    /// Replaces Fourier magnitudes by the measured ones on constrained pixels.
    fn fourier_project(&mut self, g: &[Complex64], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend_from_slice(g);
        self.fft.process(out, Direction::Forward);
        for ((v, &a), &c) in out.iter_mut().zip(&self.amp).zip(&self.constrained) {
            if c {
                let m = v.norm();
                *v = if m > 0.0 { *v * (a / m) } else { Complex64::new(a, 0.0) };
            }
        }
        self.fft.process(out, Direction::Inverse);
    }

    fn support_error(&self, gf: &[Complex64]) -> f64 {
        let (mut out, mut total) = (kahan::CompensatedSum::new(), kahan::CompensatedSum::new());
        for (v, &s) in gf.iter().zip(&self.support) {
            let e = v.norm_sqr();
            total.add(e);
            if !s {
                out.add(e);
            }
        }
        let t = total.value();
        if t > 0.0 {
            (out.value() / t).sqrt()
        } else {
            0.0
        }
    }

    fn run(&mut self, mut g: Vec<Complex64>, beta: f64, hio_iters: usize, er_iters: usize) -> (Vec<Complex64>, f64) {
        let mut gf = Vec::with_capacity(g.len());
        for _ in 0..hio_iters {
            self.fourier_project(&g, &mut gf);
            for ((x, f), &s) in g.iter_mut().zip(&gf).zip(&self.support) {
                *x = if s { *f } else { *x - *f * beta };
            }
        }
        for _ in 0..er_iters {
            self.fourier_project(&g, &mut gf);
            for ((x, f), &s) in g.iter_mut().zip(&gf).zip(&self.support) {
                *x = if s { *f } else { Complex64::new(0.0, 0.0) };
            }
        }
        if gf.is_empty() {
            self.fourier_project(&g, &mut gf);
        }
        let error = self.support_error(&gf);
        (g, error)
    }

    fn finish(&mut self, g: Vec<Complex64>, error: f64, seed: u64) -> Result<PhaseResult> {
        let n = self.n;
        let mut spectrum = g.clone();
        self.fft.process(&mut spectrum, Direction::Forward);
        let amplitudes = RealGrid::from_vec(n, spectrum.iter().map(|c| c.norm()).collect())?.fftshift();
        Ok(PhaseResult {
            real_space: ComplexGrid::from_vec(n, g)?.fftshift(),
            amplitudes,
            real_space_error: error,
            seed,
        })
    }
}

/// Imposes the measured amplitudes on the constrained (non-free) Fourier
/// pixels of a centered real-space iterate, leaving free pixels as they are.
pub fn magnitude_projection(amplitudes: &RealGrid, free_mask: &SupportMask, g: &ComplexGrid) -> Result<ComplexGrid> {
    let n = amplitudes.n();
    let mut proj = Projector::new(amplitudes, free_mask, &SupportMask::filled(n, true))?;
    g.ensure_same_size(n, "iterate")?;
    let mut out = Vec::with_capacity(n * n);
    proj.fourier_project(&g.ifftshift().into_vec(), &mut out);
    Ok(ComplexGrid::from_vec(n, out)?.fftshift())
}

/// Phase retrieval from a supplied initial real-space guess (centered).
pub fn phase_from(
    amplitudes: &RealGrid,
    free_mask: &SupportMask,
    support: &SupportMask,
    config: &PhaseConfig,
    initial: &ComplexGrid,
    seed: u64,
) -> Result<PhaseResult> {
    let mut proj = Projector::new(amplitudes, free_mask, support)?;
    initial.ensure_same_size(proj.n, "initial guess")?;
    let g = initial.ifftshift().into_vec();
    let (g, err) = proj.run(g, config.beta, config.hio_iters, config.er_iters);
    proj.finish(g, err, seed)
}

/// One reconstruction from uniformly random initial phases.
pub fn phase_single(
    amplitudes: &RealGrid,
    free_mask: &SupportMask,
    support: &SupportMask,
    config: &PhaseConfig,
    seed: u64,
) -> Result<PhaseResult> {
    let mut proj = Projector::new(amplitudes, free_mask, support)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g: Vec<Complex64> = proj
        .amp
        .iter()
        .zip(&proj.constrained)
        .map(|(&a, &c)| {
            let phase = rng.random_range(0.0..2.0 * PI);
            if c {
                Complex64::from_polar(a, phase)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    proj.fft.process(&mut g, Direction::Inverse);
    let (g, err) = proj.run(g, config.beta, config.hio_iters, config.er_iters);
    proj.finish(g, err, seed)
}

/// Point reflection through index 0 with conjugation, in unshifted order.
fn twin(n: usize, g: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = g[((n - i) % n) * n + (n - j) % n].conj();
        }
    }
    out
}

/// Circular shift so that `out[x] = g[x - (di, dj)]`.
fn roll(n: usize, g: &[Complex64], di: usize, dj: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[((i + di) % n) * n + (j + dj) % n] = g[i * n + j];
        }
    }
    out
}

/// Aligns `g` to `reference` by integer circular shift, global phase and
/// the twin ambiguity, maximizing the cross-correlation peak.
pub fn register(reference: &ComplexGrid, g: &ComplexGrid) -> Result<ComplexGrid> {
    let n = reference.n();
    g.ensure_same_size(n, "registered object")?;
    let mut fft = Fft2::new(n)?;
    let mut rf = reference.as_slice().to_vec();
    fft.process(&mut rf, Direction::Forward);

    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for candidate in [g.as_slice().to_vec(), twin(n, g.as_slice())] {
        let mut cf = candidate.clone();
        fft.process(&mut cf, Direction::Forward);
        let mut corr: Vec<Complex64> = rf.iter().zip(&cf).map(|(a, b)| a * b.conj()).collect();
        fft.process(&mut corr, Direction::Inverse);
        let (peak_idx, peak) = corr
            .iter()
            .enumerate()
            .fold((0, Complex64::new(0.0, 0.0)), |acc, (k, &v)| if v.norm() > acc.1.norm() { (k, v) } else { acc });
        let phase = if peak.norm() > 0.0 { peak / peak.norm() } else { Complex64::new(1.0, 0.0) };
        let mut aligned = roll(n, &candidate, peak_idx / n, peak_idx % n);
        for v in aligned.iter_mut() {
            *v *= phase;
        }
        if best.as_ref().is_none_or(|(m, _)| peak.norm() > *m) {
            best = Some((peak.norm(), aligned));
        }
    }
    ComplexGrid::from_vec(n, best.expect("two candidates").1)
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    /// Fourier amplitudes of the averaged object, centered.
    pub amplitudes: RealGrid,
    /// Registered average of the best reconstructions, centered.
    pub object: ComplexGrid,
    /// All replicates, sorted by real-space error.
    pub results: Vec<PhaseResult>,
}

/// Averages the registered objects (aligned to the first one).
pub fn average_registered(objects: &[&ComplexGrid]) -> Result<ComplexGrid> {
    let Some(first) = objects.first() else {
        return invalid("nothing to average");
    };
    let n = first.n();
    let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
    for (k, obj) in objects.iter().enumerate() {
        let aligned = if k == 0 { (*obj).clone() } else { register(first, obj)? };
        for (a, v) in acc.iter_mut().zip(aligned.as_slice()) {
            *a += v;
        }
    }
    let scale = 1.0 / objects.len() as f64;
    ComplexGrid::from_vec(n, acc.into_iter().map(|v| v * scale).collect())
}

pub fn fourier_amplitudes(object: &ComplexGrid) -> Result<RealGrid> {
    let mut fft = Fft2::new(object.n())?;
    let spectrum = fft.transform(object, Direction::Forward);
    Ok(spectrum.abs().fftshift())
}

/// Runs `replicates` independent reconstructions (seeds `seed + i`), keeps
/// the `keep_best` with the lowest real-space error and averages them.
pub fn phase_ensemble(amplitudes: &RealGrid, free_mask: &SupportMask, config: &PhaseConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let support = config.support(amplitudes.n())?;
    let mut results = (0..config.replicates)
        .into_par_iter()
        .map(|i| phase_single(amplitudes, free_mask, &support, config, config.seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| a.real_space_error.total_cmp(&b.real_space_error));
    let kept: Vec<&ComplexGrid> = results.iter().take(config.keep_best).map(|r| &r.real_space).collect();
    let object = average_registered(&kept)?;
    let amplitudes = fourier_amplitudes(&object)?;
    Ok(EnsembleResult {
        amplitudes,
        object,
        results,
    })
}
