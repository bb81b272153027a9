pub mod curve;
pub mod deviation;
pub mod error;
pub mod geodesic;
pub mod grid;
pub mod heat_kernel;
pub mod optimizer;
pub mod pde;
pub mod quad;
pub mod rate;
pub mod selftest;
pub mod she;
pub mod special;
pub mod stats;

pub use curve::{RateCurve, RatePoint};
pub use error::{Error, Result};
pub use grid::{Potential, ScalarField, SpaceTimeGrid, TimeAxis};
pub use optimizer::{OptimizationOutcome, OptimizerConfig, Tail};
pub use pde::{HeatPotentialSolver, SolverConfig};
pub use rate::{phi_exact, PhiConfig};
pub use she::{SheConfig, TailEstimate};
pub use stats::McEstimate;
