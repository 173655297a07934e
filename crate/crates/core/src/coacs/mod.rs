//! Convex healing of sparse diffraction intensities.

mod heal;
mod lipschitz;
mod objective;
mod rho;
mod solver;

pub use heal::{heal, heal_problem, HealConfig, HealOutput, OuterRecord};
pub use lipschitz::{lipschitz_policy, BoundMode, LipschitzEstimate, RELATIVE_EPS};
pub use objective::{data_objective, support_penalty, HealProblem, Objective, Terms, TransformCache};
pub use rho::rho_l;
pub use solver::{solve_inner, Evaluated, InnerOptions, Preconditioned, SmoothObjective, SolverState, SolverStats};
