//! Dense primal active-set solver for convex quadratic programs
//!
//! ```text
//!     minimize    1/2 x' H x + f' x
//!     subject to  A x <= b
//! ```
//!
//! `H` only needs to be positive semidefinite. Steps are computed in the null
//! space of the working set; directions of zero curvature are followed as rays
//! until a constraint blocks them, which also makes the solver usable for
//! linear programs (`H = 0`). A feasible starting point comes from a phase-1
//! linear program `min t s.t. A x - t <= b, t >= 0`.
//!
//! The constraint matrix and objective are fixed per [`QpKernel`]; only the
//! right-hand side changes between calls, which is what the branch-and-bound
//! tree needs when it tightens binary bounds.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::linalg::{min_sym_eigenvalue, Mat, Vector};

/// Tikhonov shift applied to singular, nonzero Hessians.
pub const REGULARIZATION: f64 = 1e-10;
/// Smallest eigenvalue below which the shift is applied.
pub const REGULARIZATION_THRESHOLD: f64 = 1e-12;
/// Phase-1 optimum above which the polytope is declared empty.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct QpSettings {
    /// Dual feasibility tolerance, scaled by the gradient magnitude.
    pub tol: f64,
    /// Iteration cap; `None` picks one from the problem size.
    pub max_iter: Option<usize>,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: None,
        }
    }
}

/// Primal point and working set carried from a parent node.
#[derive(Clone, Debug, Default)]
pub struct WarmStart {
    pub x: Vector,
    pub working_set: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct QpOutput {
    pub status: QpStatus,
    pub x: Vector,
    /// Objective with the unregularized Hessian.
    pub objective: f64,
    pub working_set: Vec<usize>,
    pub iterations: usize,
}

impl QpOutput {
    fn failed(status: QpStatus, d: usize, iterations: usize) -> Self {
        Self {
            status,
            x: Vector::zeros(d),
            objective: f64::INFINITY,
            working_set: Vec::new(),
            iterations,
        }
    }
}

/// Objective and constraint matrix of a QP family sharing everything but `b`.
#[derive(Clone, Debug)]
pub struct QpKernel {
    h: Mat,
    h_eff: Mat,
    f: Vector,
    /// Constraint rows scaled to unit Euclidean norm.
    a: Mat,
    raw: Mat,
    row_scale: Vec<f64>,
    row_norms: Vec<f64>,
    linear: bool,
    pure_feasibility: bool,
}

impl QpKernel {
    pub fn new(h: Mat, f: Vector, a: Mat) -> Self {
        assert_eq!(h.nrows(), h.ncols());
        assert_eq!(h.nrows(), f.len());
        assert_eq!(a.ncols(), f.len());
        let linear = h.iter().all(|&v| v == 0.0);
        let pure_feasibility = linear && f.iter().all(|&v| v == 0.0);
        let h_eff = if !linear && min_sym_eigenvalue(&h) < REGULARIZATION_THRESHOLD {
            &h + Mat::identity(h.nrows(), h.ncols()) * REGULARIZATION
        } else {
            h.clone()
        };
        let row_scale: Vec<f64> = (0..a.nrows())
            .map(|i| match a.row(i).norm() {
                n if n > 0.0 => 1.0 / n,
                _ => 1.0,
            })
            .collect();
        let mut scaled = a.clone();
        for (i, &s) in row_scale.iter().enumerate() {
            scaled.row_mut(i).scale_mut(s);
        }
        let row_norms = (0..a.nrows()).map(|i| scaled.row(i).norm()).collect();
        Self {
            h,
            h_eff,
            f,
            a: scaled,
            raw: a,
            row_scale,
            row_norms,
            linear,
            pure_feasibility,
        }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn constraints(&self) -> &Mat {
        &self.raw
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.f.dot(x)
    }

    /// Solves the QP for right-hand side `b`.
    pub fn solve(&self, b: &Vector, warm: Option<&WarmStart>, settings: &QpSettings) -> QpOutput {
        let d = self.dim();
        let m = self.rows();
        assert_eq!(b.len(), m);
        let b = &b.component_mul(&Vector::from_column_slice(&self.row_scale));
        let max_iter = settings.max_iter.unwrap_or(200 + 30 * (d + m));

        let start = warm
            .filter(|w| w.x.len() == d)
            .map(|w| w.x.clone())
            .unwrap_or_else(|| Vector::zeros(d));

        let (x, phase1_set, it1) = match self.phase_one(b, &start, settings, max_iter) {
            Ok(v) => v,
            Err((status, it)) => return QpOutput::failed(status, d, it),
        };
        if self.pure_feasibility {
            return QpOutput {
                status: QpStatus::Optimal,
                objective: 0.0,
                x,
                working_set: phase1_set,
                iterations: it1,
            };
        }

        let mut seed: Vec<usize> = phase1_set;
        if let Some(w) = warm {
            seed.extend(w.working_set.iter().copied().filter(|&i| i < m));
        }
        let working = self.independent_active(&x, b, &seed);

        let problem = ActiveSetProblem {
            h: &self.h_eff,
            f: &self.f,
            a: &self.a,
            b,
            row_norms: &self.row_norms,
            linear: self.linear,
        };
        match problem.run(x, working, settings.tol, max_iter) {
            Ok((x, w, it2)) => QpOutput {
                status: QpStatus::Optimal,
                objective: self.objective(&x),
                x,
                working_set: w,
                iterations: it1 + it2,
            },
            Err((status, it2)) => QpOutput::failed(status, d, it1 + it2),
        }
    }

    /// Finds a feasible point starting from `start`, or proves infeasibility.
    fn phase_one(
        &self,
        b: &Vector,
        start: &Vector,
        settings: &QpSettings,
        max_iter: usize,
    ) -> Result<(Vector, Vec<usize>, usize), (QpStatus, usize)> {
        let d = self.dim();
        let m = self.rows();
        let residual = &self.a * start - b;
        let worst = residual.iter().copied().fold(0.0_f64, f64::max);
        let active: Vec<usize> = (0..m)
            .filter(|&i| residual[i].abs() <= FEASIBILITY_TOL)
            .collect();
        if worst <= FEASIBILITY_TOL {
            return Ok((start.clone(), active, 0));
        }

        // Variables (x, t): rows a_i x - t <= b_i and -t <= 0.
        let mut a1 = Mat::zeros(m + 1, d + 1);
        a1.view_mut((0, 0), (m, d)).copy_from(&self.a);
        for i in 0..m {
            a1[(i, d)] = -1.0;
        }
        a1[(m, d)] = -1.0;
        let mut b1 = Vector::zeros(m + 1);
        b1.rows_mut(0, m).copy_from(b);
        let mut f1 = Vector::zeros(d + 1);
        f1[d] = 1.0;
        let h1 = Mat::zeros(d + 1, d + 1);
        let norms1: Vec<f64> = (0..m + 1).map(|i| a1.row(i).norm()).collect();

        let mut x1 = Vector::zeros(d + 1);
        x1.rows_mut(0, d).copy_from(start);
        x1[d] = worst;

        let problem = ActiveSetProblem {
            h: &h1,
            f: &f1,
            a: &a1,
            b: &b1,
            row_norms: &norms1,
            linear: true,
        };
        let (x1, w1, it) = problem.run(x1, Vec::new(), settings.tol, max_iter)?;
        let t = x1[d];
        let x = x1.rows(0, d).into_owned();
        // Judge feasibility on the original rows; t can stall slightly above zero.
        let viol = (&self.a * &x - b).iter().copied().fold(0.0_f64, f64::max);
        if t > FEASIBILITY_TOL && viol > FEASIBILITY_TOL {
            return Err((QpStatus::Infeasible, it));
        }
        let set = w1.into_iter().filter(|&i| i < m).collect();
        Ok((x, set, it))
    }

    /// Greedy linearly independent subset of `candidates` active at `x`.
    fn independent_active(&self, x: &Vector, b: &Vector, candidates: &[usize]) -> Vec<usize> {
        let d = self.dim();
        let mut basis: Vec<Vector> = Vec::new();
        let mut chosen = Vec::new();
        for &i in candidates {
            if chosen.contains(&i) || basis.len() >= d {
                continue;
            }
            let ai = self.a.row(i).transpose();
            let scale = 1.0 + b[i].abs();
            if (ai.dot(x) - b[i]).abs() > 1e-9 * scale {
                continue;
            }
            let mut r = ai.clone();
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
            let n = r.norm();
            if n > 1e-8 * self.row_norms[i].max(1e-300) {
                basis.push(r / n);
                chosen.push(i);
            }
        }
        chosen
    }
}

struct ActiveSetProblem<'a> {
    h: &'a Mat,
    f: &'a Vector,
    a: &'a Mat,
    b: &'a Vector,
    row_norms: &'a [f64],
    linear: bool,
}

enum Direction {
    /// Newton step; the minimizer on the current face lies at step length 1.
    Newton(Vector),
    /// Descent along zero curvature; only a constraint can stop it.
    Ray(Vector),
}

impl ActiveSetProblem<'_> {
    /// Runs the active-set iteration from a feasible `x`.
    fn run(
        &self,
        mut x: Vector,
        mut working: Vec<usize>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vector, Vec<usize>, usize), (QpStatus, usize)> {
        let d = x.len();
        let m = self.a.nrows();
        let mut degenerate_steps = 0usize;
        let bland_after = 2 * (d + m) + 10;
        // Set after an unblocked Newton step: the point is the minimizer on
        // the current face up to rounding, so the next step is skipped.
        let mut face_min = false;

        for iter in 0..max_iter {
            let g = self.h * &x + self.f;
            let basis = NullSpace::new(self.a, &working, d);
            let Some(basis) = basis else {
                return Err((QpStatus::NumericalFailure, iter));
            };

            let dir = self.direction(&basis, &g);
            let p = match &dir {
                Direction::Newton(p) | Direction::Ray(p) => p,
            };
            let step_tol = 1e-12 * (1.0 + x.norm());
            let is_ray = matches!(dir, Direction::Ray(_));

            if !is_ray && (face_min || p.norm() <= step_tol) {
                face_min = false;
                // Stationary on the current face: inspect multipliers.
                let lambda = basis.multipliers(&g);
                let gscale = 1.0 + g.amax();
                let bland = degenerate_steps > bland_after;
                let mut drop: Option<(usize, f64)> = None;
                for (k, &l) in lambda.iter().enumerate() {
                    if l < -tol * gscale {
                        let better = match drop {
                            None => true,
                            Some((_, best)) => !bland && l < best,
                        };
                        if better {
                            drop = Some((k, l));
                        }
                    }
                }
                match drop {
                    None => return Ok((x, working, iter)),
                    Some((k, _)) => {
                        working.remove(k);
                        continue;
                    }
                }
            }

            // Ratio test against constraints outside the working set.
            let pnorm = p.norm();
            let mut alpha = if is_ray { f64::INFINITY } else { 1.0 };
            let mut blocking: Option<usize> = None;
            let a_p = self.a * p;
            let a_x = self.a * &x;
            let mut in_working = vec![false; m];
            for &i in &working {
                in_working[i] = true;
            }
            for i in 0..m {
                if in_working[i] {
                    continue;
                }
                let ap = a_p[i];
                if ap <= 1e-12 * self.row_norms[i] * pnorm {
                    continue;
                }
                let slack = (self.b[i] - a_x[i]).max(0.0);
                let ai = slack / ap;
                if ai < alpha {
                    alpha = ai;
                    blocking = Some(i);
                }
            }

            match blocking {
                None if is_ray => return Err((QpStatus::Unbounded, iter)),
                None => {
                    x += p;
                    degenerate_steps = 0;
                    face_min = true;
                }
                Some(i) => {
                    if alpha > 0.0 {
                        x.axpy(alpha, p, 1.0);
                        degenerate_steps = 0;
                    } else {
                        degenerate_steps += 1;
                    }
                    working.push(i);
                }
            }
        }
        Err((QpStatus::NumericalFailure, max_iter))
    }

    fn direction(&self, basis: &NullSpace, g: &Vector) -> Direction {
        let z = &basis.z;
        if z.ncols() == 0 {
            return Direction::Newton(Vector::zeros(g.len()));
        }
        let gz = z.transpose() * g;
        let gtol = 1e-11 * (1.0 + g.amax());
        if self.linear {
            return if gz.amax() > gtol {
                Direction::Ray(-(z * gz))
            } else {
                Direction::Newton(Vector::zeros(g.len()))
            };
        }
        let hz = z.transpose() * self.h * z;
        let hz = (&hz + hz.transpose()) * 0.5;
        if let Some(chol) = hz.clone().cholesky() {
            let l = chol.l_dirty();
            let dmin = (0..l.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
            let dmax = (0..l.nrows()).map(|i| l[(i, i)]).fold(0.0, f64::max);
            if dmin > 1e-6 * dmax {
                return Direction::Newton(z * chol.solve(&(-gz)));
            }
        }
        let eig = SymmetricEigen::new(hz);
        let emax = eig.eigenvalues.iter().copied().fold(0.0_f64, |a, v| a.max(v.abs()));
        let ctol = 1e-14 * emax.max(1.0);
        let mut newton = Vector::zeros(gz.len());
        let mut flat = Vector::zeros(gz.len());
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            let c = v.dot(&gz);
            if lam > ctol {
                newton.axpy(-c / lam, &v, 1.0);
            } else {
                flat.axpy(c, &v, 1.0);
            }
        }
        if flat.amax() > gtol {
            Direction::Ray(-(z * flat))
        } else {
            Direction::Newton(z * newton)
        }
    }
}

/// Null-space basis of the working-set normals plus the factors needed for
/// multiplier recovery.
struct NullSpace {
    z: Mat,
    /// First `k` rows of Q', k = working set size.
    qt_range: Mat,
    r: Mat,
}

impl NullSpace {
    fn new(a: &Mat, working: &[usize], d: usize) -> Option<Self> {
        let k = working.len();
        if k == 0 {
            return Some(Self {
                z: Mat::identity(d, d),
                qt_range: Mat::zeros(0, d),
                r: Mat::zeros(0, 0),
            });
        }
        if k > d {
            return None;
        }
        let mut aw_t = Mat::zeros(d, k);
        for (c, &i) in working.iter().enumerate() {
            aw_t.set_column(c, &a.row(i).transpose());
        }
        let qr = aw_t.qr();
        let r = qr.r();
        let rmax = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..k).any(|i| r[(i, i)].abs() <= 1e-13 * rmax.max(1e-300)) {
            return None;
        }
        let mut qt = Mat::identity(d, d);
        qr.q_tr_mul(&mut qt);
        let z = qt.rows(k, d - k).transpose();
        let qt_range = qt.rows(0, k).into_owned();
        Some(Self { z, qt_range, r })
    }

    /// Least-squares solution of A_W' lambda = -g.
    fn multipliers(&self, g: &Vector) -> Vector {
        if self.r.nrows() == 0 {
            return Vector::zeros(0);
        }
        let rhs = -(&self.qt_range * g);
        self.r
            .solve_upper_triangular(&rhs)
            .unwrap_or_else(|| Vector::from_element(rhs.len(), f64::NAN))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve(h: &[f64], f: &[f64], a: &[f64], b: &[f64]) -> QpOutput {
        let d = f.len();
        let m = b.len();
        let k = QpKernel::new(
            Mat::from_row_slice(d, d, h),
            Vector::from_row_slice(f),
            Mat::from_row_slice(m, d, a),
        );
        k.solve(&Vector::from_row_slice(b), None, &QpSettings::default())
    }

    #[test]
    fn projection_onto_halfline() {
        // min 1/2 u^2 s.t. u >= 1
        let out = solve(&[1.0], &[0.0], &[-1.0], &[-1.0]);
        assert_eq!(out.status, QpStatus::Optimal);
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.objective, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn clamped_minimum_with_relaxed_binary() {
        // min 1/2 (u - 1.5)^2 s.t. u = d, 0 <= d <= 1; variables (u, d).
        // Constant 1.125 is dropped from the objective.
        let out = solve(
            &[1.0, 0.0, 0.0, 0.0],
            &[-1.5, 0.0],
            &[1.0, -1.0, -1.0, 1.0, 0.0, 1.0, 0.0, -1.0],
            &[0.0, 0.0, 1.0, 0.0],
        );
        assert_eq!(out.status, QpStatus::Optimal);
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.x[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.objective + 1.125, 0.125, epsilon = 1e-9);
    }

    #[test]
    fn linear_program_reaches_vertex() {
        // min -x - y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> (1.6, 1.2)
        let out = solve(
            &[0.0; 4],
            &[-1.0, -1.0],
            &[1.0, 2.0, 3.0, 1.0, -1.0, 0.0, 0.0, -1.0],
            &[4.0, 6.0, 0.0, 0.0],
        );
        assert_eq!(out.status, QpStatus::Optimal);
        assert_abs_diff_eq!(out.x[0], 1.6, epsilon = 1e-9);
        assert_abs_diff_eq!(out.x[1], 1.2, epsilon = 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let out = solve(&[1.0], &[0.0], &[1.0, -1.0], &[0.0, -1.0]);
        assert_eq!(out.status, QpStatus::Infeasible);
        let out = solve(&[0.0], &[-1.0], &[-1.0], &[0.0]);
        assert_eq!(out.status, QpStatus::Unbounded);
    }

    #[test]
    fn feasibility_only_returns_feasible_point() {
        let out = solve(&[0.0; 4], &[0.0, 0.0], &[-1.0, -1.0, 1.0, 0.0], &[-3.0, 1.0]);
        assert_eq!(out.status, QpStatus::Optimal);
        assert!(out.x[0] + out.x[1] >= 3.0 - 1e-9);
        assert!(out.x[0] <= 1.0 + 1e-9);
    }

    #[test]
    fn singular_hessian_with_linear_term() {
        // min 1/2 x^2 - y s.t. x + y <= 2, y <= 1 -> (0, 1), objective -1.
        let out = solve(&[1.0, 0.0, 0.0, 0.0], &[0.0, -1.0], &[1.0, 1.0, 0.0, 1.0], &[2.0, 1.0]);
        assert_eq!(out.status, QpStatus::Optimal);
        assert_abs_diff_eq!(out.x[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(out.x[1], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(out.objective, -1.0, epsilon = 1e-6);
    }
}
