//! Mixed-integer quadratic programs
//!
//! ```text
//!     minimize    1/2 U' H U + f' U
//!     subject to  Phi U <= phi
//!                 lo <= U <= hi
//!                 U_i in {0, 1}   for i in B
//! ```
//!
//! [`solve`] runs branch-and-bound over convex relaxations solved by the
//! dense active-set kernel in [`qp`]. [`brute_force`] enumerates every binary
//! assignment and is kept as the reference the tree search is tested against.

mod bnb;
pub mod io;
pub mod qp;
pub mod random;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{min_sym_eigenvalue, Mat, Vector};

pub use bnb::solve;
pub use qp::{QpKernel, QpOutput, QpSettings, QpStatus, WarmStart};

/// Largest binary count [`brute_force`] accepts.
pub const BRUTE_FORCE_MAX_BINARIES: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum MiqpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Hessian is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("binary index {0} out of range")]
    BinaryIndex(usize),
    #[error("invalid bounds for variable {index}: [{lo}, {hi}]")]
    Bounds { index: usize, lo: f64, hi: f64 },
    #[error("{0} binaries exceed the brute-force limit of {BRUTE_FORCE_MAX_BINARIES}")]
    TooManyBinaries(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiqpProblem {
    pub h: Mat,
    pub f: Vector,
    pub phi_matrix: Mat,
    pub phi_rhs: Vector,
    /// Sorted, deduplicated indices of binary variables.
    pub binary: Vec<usize>,
    /// Per-variable `(lo, hi)`; infinite entries mean unbounded.
    pub bounds: Vec<(f64, f64)>,
    /// Constant added to every reported objective value.
    pub constant: f64,
}

impl MiqpProblem {
    /// Builds a problem with `[0, 1]` boxes on binaries and free continuous
    /// variables.
    pub fn new(h: Mat, f: Vector, phi_matrix: Mat, phi_rhs: Vector, binary: Vec<usize>) -> Self {
        let d = f.len();
        let mut binary = binary;
        binary.sort_unstable();
        binary.dedup();
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); d];
        for &i in &binary {
            if i < d {
                bounds[i] = (0.0, 1.0);
            }
        }
        Self {
            h,
            f,
            phi_matrix,
            phi_rhs,
            binary,
            bounds,
            constant: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn validate(&self) -> Result<(), MiqpError> {
        let d = self.dim();
        if self.h.shape() != (d, d) {
            return Err(MiqpError::Dimension(format!(
                "H is {:?}, expected ({d}, {d})",
                self.h.shape()
            )));
        }
        if self.phi_matrix.ncols() != d || self.phi_matrix.nrows() != self.phi_rhs.len() {
            return Err(MiqpError::Dimension(format!(
                "Phi is {:?} with {} right-hand sides for {d} variables",
                self.phi_matrix.shape(),
                self.phi_rhs.len()
            )));
        }
        if self.bounds.len() != d {
            return Err(MiqpError::Dimension(format!(
                "{} bounds for {d} variables",
                self.bounds.len()
            )));
        }
        if let Some(&i) = self.binary.iter().find(|&&i| i >= d) {
            return Err(MiqpError::BinaryIndex(i));
        }
        for (index, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(MiqpError::Bounds { index, lo, hi });
            }
        }
        if d > 0 {
            let asym = (&self.h - self.h.transpose()).amax();
            if asym > 1e-9 * (1.0 + self.h.amax()) {
                return Err(MiqpError::Dimension("H is not symmetric".into()));
            }
            let emin = min_sym_eigenvalue(&self.h);
            if emin < -1e-10 * (1.0 + self.h.amax()) {
                return Err(MiqpError::NotPsd(emin));
            }
        }
        Ok(())
    }

    pub fn objective(&self, u: &Vector) -> f64 {
        0.5 * u.dot(&(&self.h * u)) + self.f.dot(u) + self.constant
    }

    /// Largest violation of the linear rows and the variable bounds.
    pub fn constraint_residual(&self, u: &Vector) -> f64 {
        let rows = (&self.phi_matrix * u - &self.phi_rhs)
            .iter()
            .copied()
            .fold(0.0_f64, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(u.iter())
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi))
            .fold(0.0_f64, f64::max);
        rows.max(bounds)
    }

    /// Largest distance of a binary entry from {0, 1}.
    pub fn integrality_residual(&self, u: &Vector) -> f64 {
        self.binary
            .iter()
            .map(|&i| (u[i] - u[i].round()).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Optimal,
    FirstFeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelection {
    BestBound,
    DepthFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branching {
    MostFractional,
    FirstIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOpts {
    pub mode: SolveMode,
    pub integrality_tol: f64,
    /// Absolute optimality gap used for pruning.
    pub gap: f64,
    pub node_limit: usize,
    /// `None` picks best-bound for optimal mode and depth-first otherwise.
    pub node_selection: Option<NodeSelection>,
    pub branching: Branching,
    pub qp_tol: f64,
    /// Sequential, fixed-order exploration. The tree search is always
    /// sequential today; the flag is kept in the configuration surface.
    pub deterministic: bool,
    /// Record every explored node (parent and relaxation bound).
    pub trace: bool,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self {
            mode: SolveMode::Optimal,
            integrality_tol: 1e-6,
            gap: 1e-8,
            node_limit: 1_000_000,
            node_selection: None,
            branching: Branching::MostFractional,
            qp_tol: 1e-8,
            deterministic: true,
            trace: false,
        }
    }
}

impl SolverOpts {
    pub fn first_feasible() -> Self {
        Self {
            mode: SolveMode::FirstFeasible,
            ..Self::default()
        }
    }

    pub fn selection(&self) -> NodeSelection {
        self.node_selection.unwrap_or(match self.mode {
            SolveMode::Optimal => NodeSelection::BestBound,
            SolveMode::FirstFeasible => NodeSelection::DepthFirst,
        })
    }

    pub(crate) fn qp_settings(&self) -> QpSettings {
        QpSettings {
            tol: self.qp_tol,
            max_iter: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    FirstFeasible,
    Infeasible,
    NodeLimit,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, Self::Optimal | Self::FirstFeasible)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub qp_solves: usize,
    pub wall_time_ms: f64,
    /// Relaxations the QP kernel could not finish; such nodes are dropped.
    pub numerical_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeTrace {
    pub id: usize,
    pub parent: Option<usize>,
    /// Relaxation objective, `None` when the relaxation was infeasible.
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub u: Vector,
    pub objective: f64,
    pub stats: SolveStats,
    pub trace: Vec<NodeTrace>,
}

/// Reference solver: enumerate all `2^|B|` binary assignments.
pub fn brute_force(problem: &MiqpProblem, opts: &SolverOpts) -> Result<Solution, MiqpError> {
    problem.validate()?;
    let nb = problem.binary.len();
    if nb > BRUTE_FORCE_MAX_BINARIES {
        return Err(MiqpError::TooManyBinaries(nb));
    }
    let start = std::time::Instant::now();
    let layout = bnb::RowLayout::new(problem);
    let kernel = layout.kernel(problem);
    let settings = opts.qp_settings();
    let mut best: Option<(f64, Vector)> = None;
    let mut stats = SolveStats::default();
    let mut fixing = vec![None; nb];
    for mask in 0u64..(1u64 << nb) {
        for (k, slot) in fixing.iter_mut().enumerate() {
            *slot = Some(((mask >> k) & 1) as u8);
        }
        let b = layout.rhs(problem, &fixing);
        let out = kernel.solve(&b, None, &settings);
        stats.nodes += 1;
        stats.qp_solves += 1;
        match out.status {
            QpStatus::Optimal => {
                let j = out.objective + problem.constant;
                if best.as_ref().is_none_or(|(jb, _)| j < *jb) {
                    best = Some((j, out.x));
                }
            }
            QpStatus::NumericalFailure => stats.numerical_failures += 1,
            _ => {}
        }
    }
    stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(match best {
        Some((objective, mut u)) => {
            for &i in &problem.binary {
                u[i] = u[i].round();
            }
            Solution {
                status: SolveStatus::Optimal,
                u,
                objective,
                stats,
                trace: Vec::new(),
            }
        }
        None => Solution {
            status: SolveStatus::Infeasible,
            u: Vector::zeros(problem.dim()),
            objective: f64::INFINITY,
            stats,
            trace: Vec::new(),
        },
    })
}
