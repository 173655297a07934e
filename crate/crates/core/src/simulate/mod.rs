//! Synthetic diffraction data: particle projection, far-field intensities,
//! Poisson photon sampling and a central beamstop.

mod particle;

pub use particle::{project_particle, reference_vertex, Icosahedron, Particle, Quaternion, Sphere};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fft::{Direction, Fft2};
use crate::grid::{RealGrid, SupportMask};

/// Far-field intensity `|DFT(projection)|²` with the zero frequency moved to
/// the grid center.
pub fn diffract(projection: &RealGrid) -> Result<RealGrid> {
    let mut plan = Fft2::new(projection.n())?;
    let mut field: Vec<Complex64> = projection
        .as_slice()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    plan.process(&mut field, Direction::Forward);
    let intensity = RealGrid::from_vec(projection.n(), field.iter().map(|c| c.norm_sqr()).collect())?;
    Ok(intensity.fftshift())
}

/// Independent Poisson draws `Po(r * intensity)` per pixel, in row-major
/// order from a ChaCha8 stream seeded with `seed`.
pub fn poisson_sample(intensity: &RealGrid, r: f64, seed: u64) -> Result<RealGrid> {
    if !(r > 0.0) || !r.is_finite() {
        return invalid(format!("quantum efficiency must be positive, got {r}"));
    }
    if let Some(k) = intensity.as_slice().iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        let n = intensity.n();
        return invalid(format!(
            "intensity at ({}, {}) is {}, expected a finite non-negative value",
            k / n,
            k % n,
            intensity.as_slice()[k]
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = intensity
        .as_slice()
        .iter()
        .map(|&y| {
            let rate = r * y;
            if rate == 0.0 {
                0.0
            } else {
                Poisson::new(rate).expect("positive finite rate").sample(&mut rng)
            }
        })
        .collect();
    RealGrid::from_vec(intensity.n(), data)
}

/// Zeroes the centered `side x side` square and returns the mask of those
/// missing pixels.
pub fn apply_beamstop(counts: &RealGrid, side: usize) -> Result<(RealGrid, SupportMask)> {
    let n = counts.n();
    if side >= n {
        return invalid(format!("beamstop side {side} must be smaller than the grid side {n}"));
    }
    let mask = if side == 0 {
        SupportMask::empty(n)
    } else {
        SupportMask::centered_square(n, side)?
    };
    let masked = RealGrid::from_vec(
        n,
        counts
            .as_slice()
            .iter()
            .zip(mask.as_slice())
            .map(|(&c, &m)| if m { 0.0 } else { c })
            .collect(),
    )?;
    Ok((masked, mask))
}

/// Rescales `intensity` so that `r * Σ intensity` over pixels outside
/// `beamstop` equals `photon_budget`.
pub fn calibrate(intensity: &RealGrid, beamstop: &SupportMask, r: f64, photon_budget: f64) -> Result<RealGrid> {
    let visible = crate::kahan::sum(
        intensity
            .as_slice()
            .iter()
            .zip(beamstop.as_slice())
            .filter(|(_, &m)| !m)
            .map(|(&y, _)| y),
    );
    if !(visible > 0.0) {
        return invalid("no intensity outside the beamstop to calibrate against");
    }
    let scale = photon_budget / (r * visible);
    Ok(intensity.map(|y| y * scale))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleConfig {
    pub circumdiameter: f64,
    pub sphere_diameter: f64,
    pub density_ratio: f64,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            circumdiameter: 20.0,
            sphere_diameter: 4.0,
            density_ratio: 50.0,
        }
    }
}

impl ParticleConfig {
    pub fn particle(&self) -> Particle {
        Particle::vertex_sphere(self.circumdiameter, self.sphere_diameter, self.density_ratio)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub photon_budget: f64,
    pub quantum_efficiency: f64,
    pub beamstop_side: usize,
    pub seed: u64,
    pub patterns: usize,
    pub particle: ParticleConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 256,
            photon_budget: 10_000.0,
            quantum_efficiency: 1.0,
            beamstop_side: 25,
            seed: 1,
            patterns: 50,
            particle: ParticleConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.photon_budget > 0.0) {
            return invalid("photon_budget must be positive");
        }
        if !(self.quantum_efficiency > 0.0) {
            return invalid("quantum_efficiency must be positive");
        }
        if self.beamstop_side >= self.n {
            return invalid("beamstop_side must be smaller than n");
        }
        if self.patterns == 0 {
            return invalid("patterns must be at least 1");
        }
        Ok(())
    }

    /// Seed of pattern `index`.
    pub fn pattern_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }
}

/// Noise-free data shared by all samplings of one configuration.
#[derive(Clone, Debug)]
pub struct Truth {
    pub projection: RealGrid,
    /// Calibrated noise-free intensity; expected counts are `r * intensity`.
    pub intensity: RealGrid,
    pub beamstop: SupportMask,
}

pub fn simulate_truth(config: &SimConfig) -> Result<Truth> {
    config.validate()?;
    let projection = project_particle(&config.particle.particle(), config.n)?;
    let raw = diffract(&projection)?;
    let (_, beamstop) = apply_beamstop(&raw, config.beamstop_side)?;
    let intensity = calibrate(&raw, &beamstop, config.quantum_efficiency, config.photon_budget)?;
    Ok(Truth {
        projection,
        intensity,
        beamstop,
    })
}

/// Beamstopped photon counts for pattern `index`.
pub fn sample_pattern(config: &SimConfig, truth: &Truth, index: usize) -> Result<RealGrid> {
    let counts = poisson_sample(&truth.intensity, config.quantum_efficiency, config.pattern_seed(index))?;
    Ok(apply_beamstop(&counts, config.beamstop_side)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_diffracts_to_constant() {
        let mut p = RealGrid::zeros(8);
        p[(3, 5)] = 2.0;
        let y = diffract(&p).unwrap();
        for v in y.as_slice() {
            assert!((v - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_is_mass_squared() {
        let p = RealGrid::from_fn(16, |i, j| if (6..10).contains(&i) && (5..9).contains(&j) { 1.5 } else { 0.0 });
        let y = diffract(&p).unwrap();
        let m = p.sum();
        assert!((y[(8, 8)] - m * m).abs() < 1e-9 * m * m);
    }

    #[test]
    fn poisson_zero_rate_and_determinism() {
        let mut g = RealGrid::filled(16, 3.0);
        g[(2, 2)] = 0.0;
        let a = poisson_sample(&g, 1.0, 11).unwrap();
        let b = poisson_sample(&g, 1.0, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[(2, 2)], 0.0);
        assert!(a.as_slice().iter().all(|&v| v >= 0.0 && v.fract() == 0.0));
        assert_ne!(a, poisson_sample(&g, 1.0, 12).unwrap());
        g[(0, 1)] = -1.0;
        assert!(poisson_sample(&g, 1.0, 1).is_err());
    }

    #[test]
    fn poisson_mean_is_rate() {
        let g = RealGrid::filled(317, 5.0); // 100_489 draws
        let s = poisson_sample(&g, 1.0, 5).unwrap();
        let mean = s.sum() / s.len() as f64;
        let bound = 3.0 * (5.0 / s.len() as f64).sqrt();
        assert!((mean - 5.0).abs() < bound, "mean {mean}");
    }

    #[test]
    fn beamstop_geometry() {
        let c = RealGrid::filled(256, 1.0);
        let (m, mask) = apply_beamstop(&c, 25).unwrap();
        assert_eq!(mask.count(), 625);
        for i in 0..256 {
            for j in 0..256 {
                let inside = (116..=140).contains(&i) && (116..=140).contains(&j);
                assert_eq!(mask[(i, j)], inside);
                assert_eq!(m[(i, j)], if inside { 0.0 } else { 1.0 });
            }
        }
        let (_, one) = apply_beamstop(&c, 1).unwrap();
        assert_eq!(one.count(), 1);
        assert!(apply_beamstop(&c, 256).is_err());
    }

    #[test]
    fn calibration_hits_budget() {
        let cfg = SimConfig {
            n: 64,
            beamstop_side: 7,
            particle: ParticleConfig {
                circumdiameter: 10.0,
                sphere_diameter: 4.0,
                density_ratio: 50.0,
            },
            ..SimConfig::default()
        };
        let t = simulate_truth(&cfg).unwrap();
        let visible: f64 = t
            .intensity
            .as_slice()
            .iter()
            .zip(t.beamstop.as_slice())
            .filter(|(_, &m)| !m)
            .map(|(&y, _)| y)
            .sum();
        assert!((visible - 10_000.0).abs() < 1e-6);
    }
}
