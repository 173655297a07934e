//! Convex healing of sparse, masked diffraction patterns under a relaxed
//! autocorrelation support constraint, with the simulation, phasing and
//! evaluation pieces needed to assess it.

pub mod coacs;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod kahan;
pub mod metrics;
pub mod phasing;
pub mod simulate;
pub mod support;
pub mod window;

pub use coacs::{heal, HealConfig, HealOutput, HealProblem};
pub use error::{Error, Result};
pub use fft::{dft2, Direction, Fft2};
pub use grid::{center, ComplexGrid, RealGrid, SupportMask};
pub use metrics::{r_factor, radial_r_factor, RadialProfile};
pub use phasing::{phase_ensemble, phase_single, PhaseConfig, PhaseResult};
pub use simulate::{apply_beamstop, diffract, poisson_sample, project_particle, Particle, SimConfig};
pub use support::{autocorr_support, taper_weights};
pub use window::{hann_window, WindowPair};
