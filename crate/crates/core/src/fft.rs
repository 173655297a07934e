//! Two-dimensional discrete Fourier transform.
//!
//! The forward transform is unnormalized and the inverse carries the `1/n²`
//! factor, so that `inverse(forward(x)) == x` and
//! `Σ|forward(x)|² == n² Σ|x|²`. The zero frequency sits at index `(0, 0)`;
//! use [`crate::grid::fftshift`] to center it.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::grid::ComplexGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// A reusable 2D transform plan for one grid side.
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    column: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("transform size must be positive");
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            column: vec![Complex64::new(0.0, 0.0); n * n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Transforms `data` (row-major, `n*n` values) in place.
    pub fn process(&mut self, data: &mut [Complex64], direction: Direction) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer does not match transform size");
        let plan = match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        plan.process_with_scratch(data, &mut self.scratch);
        transpose(n, data, &mut self.column);
        plan.process_with_scratch(&mut self.column, &mut self.scratch);
        transpose(n, &self.column, data);
        if direction == Direction::Inverse {
            let scale = 1.0 / (n * n) as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub fn transform(&mut self, field: &ComplexGrid, direction: Direction) -> ComplexGrid {
        let mut out = field.clone();
        self.process(out.as_mut_slice(), direction);
        out
    }
}

fn transpose(n: usize, src: &[Complex64], dst: &mut [Complex64]) {
    const BLOCK: usize = 16;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

/// 2D transform of real data, keeping the non-redundant half spectrum.
///
/// The half spectrum holds frequencies `(u, v)` with `v` in `0..=n/2` and is
/// stored column-major, `out[v * n + u]`. Full-plane sums over a Hermitian
/// spectrum count column `v` with [`RealFft2::multiplicity`].
pub struct RealFft2 {
    n: usize,
    half: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_forward: Arc<dyn Fft<f64>>,
    col_inverse: Arc<dyn Fft<f64>>,
    row: Vec<f64>,
    row_spec: Vec<Complex64>,
    real_scratch: Vec<Complex64>,
    scratch: Vec<Complex64>,
    rows: Vec<Complex64>,
    cols: Vec<Complex64>,
}

impl RealFft2 {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("transform size must be positive");
        }
        let half = n / 2 + 1;
        let mut rplanner = RealFftPlanner::<f64>::new();
        let r2c = rplanner.plan_fft_forward(n);
        let c2r = rplanner.plan_fft_inverse(n);
        let mut planner = FftPlanner::new();
        let col_forward = planner.plan_fft_forward(n);
        let col_inverse = planner.plan_fft_inverse(n);
        let real_scratch_len = r2c.get_scratch_len().max(c2r.get_scratch_len());
        let scratch_len = col_forward
            .get_inplace_scratch_len()
            .max(col_inverse.get_inplace_scratch_len());
        let zero = Complex64::new(0.0, 0.0);
        Ok(Self {
            n,
            half,
            row: vec![0.0; n],
            row_spec: vec![zero; half],
            real_scratch: vec![zero; real_scratch_len],
            scratch: vec![zero; scratch_len],
            rows: vec![zero; n * half],
            cols: vec![zero; n * half],
            r2c,
            c2r,
            col_forward,
            col_inverse,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Length of the half-spectrum buffer.
    pub fn spectrum_len(&self) -> usize {
        self.n * self.half
    }

    /// Number of full-plane frequencies represented by half-spectrum column `v`.
    pub fn multiplicity(&self, v: usize) -> f64 {
        if v == 0 || (self.n % 2 == 0 && v == self.n / 2) {
            1.0
        } else {
            2.0
        }
    }

    /// Full-plane index `(u, v)` of half-spectrum entry `k`.
    pub fn frequency(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    /// Unnormalized forward transform of `input` (`n*n` reals, row-major).
    pub fn forward(&mut self, input: &[f64], out: &mut [Complex64]) {
        let (n, h) = (self.n, self.half);
        assert!(input.len() == n * n && out.len() == n * h);
        for i in 0..n {
            self.row.copy_from_slice(&input[i * n..(i + 1) * n]);
            self.r2c
                .process_with_scratch(&mut self.row, &mut self.row_spec, &mut self.real_scratch)
                .expect("buffer sizes match the plan");
            self.rows[i * h..(i + 1) * h].copy_from_slice(&self.row_spec);
        }
        // transpose rows (n x h) into columns (h x n)
        for i in 0..n {
            for v in 0..h {
                out[v * n + i] = self.rows[i * h + v];
            }
        }
        self.col_forward.process_with_scratch(out, &mut self.scratch);
    }

    /// Unnormalized inverse transform of a Hermitian spectrum given by its
    /// half `spec`; the result is real.
    pub fn inverse_unnormalized(&mut self, spec: &[Complex64], out: &mut [f64]) {
        let (n, h) = (self.n, self.half);
        assert!(spec.len() == n * h && out.len() == n * n);
        self.cols.copy_from_slice(spec);
        self.col_inverse.process_with_scratch(&mut self.cols, &mut self.scratch);
        for i in 0..n {
            for v in 0..h {
                self.row_spec[v] = self.cols[v * n + i];
            }
            // bins that must be real for a real output
            self.row_spec[0].im = 0.0;
            if n % 2 == 0 {
                self.row_spec[h - 1].im = 0.0;
            }
            self.c2r
                .process_with_scratch(&mut self.row_spec, &mut self.row, &mut self.real_scratch)
                .expect("buffer sizes match the plan");
            out[i * n..(i + 1) * n].copy_from_slice(&self.row);
        }
    }
}

/// One-shot 2D transform. Prefer [`Fft2`] inside loops.
pub fn dft2(field: &ComplexGrid, direction: Direction) -> Result<ComplexGrid> {
    let mut plan = Fft2::new(field.n())?;
    Ok(plan.transform(field, direction))
}
