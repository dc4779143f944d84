//! Hybrid model predictive control for mixed logical dynamical systems.

pub mod error;
pub mod linalg;
pub mod logic;
pub mod lyapunov;
pub mod miqp;
pub mod mld;
pub mod mpc;
pub mod suspension;

pub use error::{Error, Result};
pub use linalg::{Mat, Vector};
pub use miqp::{brute_force, solve, MiqpProblem, Solution, SolveStatus, SolverOpts};
pub use mld::{Dims, EquilibriumPair, MldModel, StepOptions};
