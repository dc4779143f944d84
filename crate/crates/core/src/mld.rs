//! Mixed logical dynamical models
//!
//! ```text
//!     x(t+1) = A x + B1 u + B2 delta + B3 z
//!     y(t)   = C x + D1 u + D2 delta + D3 z
//!     E2 delta + E3 z <= E1 u + E4 x + E5
//! ```
//!
//! `delta` is binary and `z` continuous. Both are determined by `(x, u)`
//! through the inequalities; [`MldModel::step`] recovers them with a
//! feasibility solve.

use std::fmt;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows, vec_inf_norm, Mat, Vector};
use crate::miqp::{self, MiqpProblem, SolverOpts};

/// Default fixed-point and constraint tolerance for equilibria.
pub const TOL_EQ: f64 = 1e-8;
/// Distance from {0, 1} accepted for binary components.
pub const BINARY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_c: usize,
    pub n_l: usize,
    pub m_c: usize,
    pub m_l: usize,
    pub p_c: usize,
    pub p_l: usize,
    pub r_c: usize,
    pub r_l: usize,
    pub q_e: usize,
}

impl Dims {
    pub fn n(&self) -> usize {
        self.n_c + self.n_l
    }

    pub fn m(&self) -> usize {
        self.m_c + self.m_l
    }

    pub fn p(&self) -> usize {
        self.p_c + self.p_l
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MldModel {
    pub a: Mat,
    pub b1: Mat,
    pub b2: Mat,
    pub b3: Mat,
    pub c: Mat,
    pub d1: Mat,
    pub d2: Mat,
    pub d3: Mat,
    pub e1: Mat,
    pub e2: Mat,
    pub e3: Mat,
    pub e4: Mat,
    pub e5: Vector,
    pub dims: Dims,
    pub binary_state_indices: Vec<usize>,
    pub binary_input_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    Shape {
        matrix: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    BinaryIndex {
        kind: &'static str,
        index: usize,
        limit: usize,
    },
    BinaryCount {
        kind: &'static str,
        declared: usize,
        listed: usize,
    },
    EmptyStateSpace,
    EmptyConstraintSet,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shape {
                matrix,
                expected,
                found,
            } => write!(f, "{matrix} is {found:?}, expected {expected:?}"),
            Self::BinaryIndex { kind, index, limit } => {
                write!(f, "binary {kind} index {index} out of range (< {limit})")
            }
            Self::BinaryCount {
                kind,
                declared,
                listed,
            } => write!(f, "{declared} binary {kind}s declared, {listed} listed"),
            Self::EmptyStateSpace => write!(f, "model has no states"),
            Self::EmptyConstraintSet => write!(f, "mixed-integer constraints admit no point"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            let text: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
            Err(Error::Invalid(text.join("; ")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumPair {
    pub x: Vector,
    pub u: Vector,
    pub delta: Vector,
    pub z: Vector,
}

impl EquilibriumPair {
    pub fn origin(dims: &Dims) -> Self {
        Self {
            x: Vector::zeros(dims.n()),
            u: Vector::zeros(dims.m()),
            delta: Vector::zeros(dims.r_l),
            z: Vector::zeros(dims.r_c),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub x_next: Vector,
    pub y: Vector,
    pub delta: Vector,
    pub z: Vector,
}

#[derive(Clone, Debug)]
pub struct StepOptions {
    pub solver: SolverOpts,
    /// Re-solve with the found `delta` excluded and warn when another
    /// assignment is feasible.
    pub probe_ambiguity: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            solver: SolverOpts::first_feasible(),
            probe_ambiguity: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    /// `T + 1` states when the run completes.
    pub states: Vec<Vector>,
    pub outputs: Vec<Vector>,
    pub deltas: Vec<Vector>,
    pub zs: Vec<Vector>,
    /// Step at which `(x, u)` left the domain, if any.
    pub infeasible_at: Option<usize>,
}

fn is_binary(v: f64) -> bool {
    v.abs() <= BINARY_TOL || (v - 1.0).abs() <= BINARY_TOL
}

impl MldModel {
    /// A linear system `x+ = A x + B u, y = C x + D u` with no logic.
    pub fn linear(a: Mat, b: Mat, c: Mat, d: Mat) -> Self {
        let n = a.nrows();
        let m = b.ncols();
        let p = c.nrows();
        Self {
            a,
            b1: b,
            b2: Mat::zeros(n, 0),
            b3: Mat::zeros(n, 0),
            c,
            d1: d,
            d2: Mat::zeros(p, 0),
            d3: Mat::zeros(p, 0),
            e1: Mat::zeros(0, m),
            e2: Mat::zeros(0, 0),
            e3: Mat::zeros(0, 0),
            e4: Mat::zeros(0, n),
            e5: Vector::zeros(0),
            dims: Dims {
                n_c: n,
                m_c: m,
                p_c: p,
                ..Dims::default()
            },
            binary_state_indices: Vec::new(),
            binary_input_indices: Vec::new(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let d = &self.dims;
        let (n, m, p) = (d.n(), d.m(), d.p());
        let mut issues = Vec::new();
        if n == 0 {
            issues.push(ValidationIssue::EmptyStateSpace);
        }
        let expected: [(&'static str, &Mat, (usize, usize)); 12] = [
            ("A", &self.a, (n, n)),
            ("B1", &self.b1, (n, m)),
            ("B2", &self.b2, (n, d.r_l)),
            ("B3", &self.b3, (n, d.r_c)),
            ("C", &self.c, (p, n)),
            ("D1", &self.d1, (p, m)),
            ("D2", &self.d2, (p, d.r_l)),
            ("D3", &self.d3, (p, d.r_c)),
            ("E1", &self.e1, (d.q_e, m)),
            ("E2", &self.e2, (d.q_e, d.r_l)),
            ("E3", &self.e3, (d.q_e, d.r_c)),
            ("E4", &self.e4, (d.q_e, n)),
        ];
        for (matrix, mat, shape) in expected {
            if mat.shape() != shape {
                issues.push(ValidationIssue::Shape {
                    matrix,
                    expected: shape,
                    found: mat.shape(),
                });
            }
        }
        if self.e5.len() != d.q_e {
            issues.push(ValidationIssue::Shape {
                matrix: "E5",
                expected: (d.q_e, 1),
                found: (self.e5.len(), 1),
            });
        }
        for (kind, list, declared, limit) in [
            ("state", &self.binary_state_indices, d.n_l, n),
            ("input", &self.binary_input_indices, d.m_l, m),
        ] {
            if list.len() != declared {
                issues.push(ValidationIssue::BinaryCount {
                    kind,
                    declared,
                    listed: list.len(),
                });
            }
            for &index in list {
                if index >= limit {
                    issues.push(ValidationIssue::BinaryIndex { kind, index, limit });
                }
            }
        }
        if issues.is_empty() && d.q_e > 0 && !self.constraint_set_nonempty() {
            issues.push(ValidationIssue::EmptyConstraintSet);
        }
        ValidationReport { issues }
    }

    /// Whether some `(x, u, delta, z)` satisfies the inequalities.
    fn constraint_set_nonempty(&self) -> bool {
        let d = &self.dims;
        let (n, m) = (d.n(), d.m());
        let cols = m + d.r_l + d.r_c + n;
        // Columns (u, delta, z, x): [-E1 E2 E3 -E4] v <= E5
        let mut phi = Mat::zeros(d.q_e, cols);
        phi.view_mut((0, 0), (d.q_e, m)).copy_from(&(-&self.e1));
        phi.view_mut((0, m), (d.q_e, d.r_l)).copy_from(&self.e2);
        phi.view_mut((0, m + d.r_l), (d.q_e, d.r_c))
            .copy_from(&self.e3);
        phi.view_mut((0, m + d.r_l + d.r_c), (d.q_e, n))
            .copy_from(&(-&self.e4));
        let mut binary: Vec<usize> = self.binary_input_indices.clone();
        binary.extend(m..m + d.r_l);
        binary.extend(self.binary_state_indices.iter().map(|&i| m + d.r_l + d.r_c + i));
        let problem = MiqpProblem::new(
            Mat::zeros(cols, cols),
            Vector::zeros(cols),
            phi,
            self.e5.clone(),
            binary,
        );
        miqp::solve(&problem, &SolverOpts::first_feasible())
            .map(|s| s.status.has_solution())
            .unwrap_or(false)
    }

    fn check_point(&self, x: &Vector, u: &Vector) -> Result<()> {
        let d = &self.dims;
        if x.len() != d.n() || u.len() != d.m() {
            return Err(Error::Dimension(format!(
                "state has {} entries and input {}, model expects {} and {}",
                x.len(),
                u.len(),
                d.n(),
                d.m()
            )));
        }
        for &i in &self.binary_state_indices {
            if !is_binary(x[i]) {
                return Err(Error::Invalid(format!("state {i} = {} is not binary", x[i])));
            }
        }
        for &i in &self.binary_input_indices {
            if !is_binary(u[i]) {
                return Err(Error::Invalid(format!("input {i} = {} is not binary", u[i])));
            }
        }
        Ok(())
    }

    /// Right-hand side `E1 u + E4 x + E5` of the mixed-integer inequalities.
    pub fn constraint_rhs(&self, x: &Vector, u: &Vector) -> Vector {
        &self.e1 * u + &self.e4 * x + &self.e5
    }

    /// `max(E2 delta + E3 z - E1 u - E4 x - E5)`, or zero without rows.
    pub fn constraint_residual(&self, x: &Vector, u: &Vector, delta: &Vector, z: &Vector) -> f64 {
        (&self.e2 * delta + &self.e3 * z - self.constraint_rhs(x, u))
            .iter()
            .copied()
            .fold(0.0_f64, f64::max)
    }

    pub fn next_state(&self, x: &Vector, u: &Vector, delta: &Vector, z: &Vector) -> Vector {
        &self.a * x + &self.b1 * u + &self.b2 * delta + &self.b3 * z
    }

    pub fn output(&self, x: &Vector, u: &Vector, delta: &Vector, z: &Vector) -> Vector {
        &self.c * x + &self.d1 * u + &self.d2 * delta + &self.d3 * z
    }

    /// Finds auxiliaries consistent with `(x, u)`, returning `None` when the
    /// point lies outside the domain.
    fn auxiliaries(
        &self,
        x: &Vector,
        u: &Vector,
        opts: &StepOptions,
    ) -> Result<Option<(Vector, Vector)>> {
        let d = &self.dims;
        let rhs = self.constraint_rhs(x, u);
        let nv = d.r_l + d.r_c;
        if nv == 0 {
            let worst = rhs.iter().map(|&v| -v).fold(0.0_f64, f64::max);
            return Ok((worst <= 1e-9).then(|| (Vector::zeros(0), Vector::zeros(0))));
        }
        let mut phi = Mat::zeros(d.q_e, nv);
        phi.view_mut((0, 0), (d.q_e, d.r_l)).copy_from(&self.e2);
        phi.view_mut((0, d.r_l), (d.q_e, d.r_c)).copy_from(&self.e3);
        let problem = MiqpProblem::new(
            Mat::zeros(nv, nv),
            Vector::zeros(nv),
            phi,
            rhs,
            (0..d.r_l).collect(),
        );
        let sol = miqp::solve(&problem, &opts.solver)?;
        if !sol.status.has_solution() {
            return Ok(None);
        }
        let delta = sol.u.rows(0, d.r_l).into_owned();
        let z = sol.u.rows(d.r_l, d.r_c).into_owned();
        if opts.probe_ambiguity && d.r_l > 0 {
            let ones = delta.iter().filter(|&&v| v > 0.5).count() as f64;
            let cut = Mat::from_fn(1, nv, |_, j| {
                if j < d.r_l {
                    if delta[j] > 0.5 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                }
            });
            let mut other = problem.clone();
            other.phi_matrix = crate::linalg::vstack(&[&problem.phi_matrix, &cut]);
            other.phi_rhs = Vector::from_iterator(
                problem.phi_rhs.len() + 1,
                problem.phi_rhs.iter().copied().chain([ones - 1.0]),
            );
            let alt = miqp::solve(&other, &opts.solver)?;
            if alt.status.has_solution() {
                warn!(
                    "auxiliary binaries are not unique at x = {:?}, u = {:?}: {:?} and {:?} both feasible",
                    x.as_slice(),
                    u.as_slice(),
                    delta.as_slice(),
                    &alt.u.as_slice()[..d.r_l]
                );
            }
        }
        Ok(Some((delta, z)))
    }

    pub fn step(&self, x: &Vector, u: &Vector, opts: &StepOptions) -> Result<StepOutput> {
        self.check_point(x, u)?;
        let (delta, z) = self.auxiliaries(x, u, opts)?.ok_or_else(|| {
            Error::Infeasible(format!(
                "(x, u) = ({:?}, {:?}) is outside the model domain",
                x.as_slice(),
                u.as_slice()
            ))
        })?;
        Ok(StepOutput {
            x_next: self.next_state(x, u, &delta, &z),
            y: self.output(x, u, &delta, &z),
            delta,
            z,
        })
    }

    pub fn check_equilibrium(&self, pair: &EquilibriumPair, tol: f64) -> bool {
        let d = &self.dims;
        if pair.x.len() != d.n()
            || pair.u.len() != d.m()
            || pair.delta.len() != d.r_l
            || pair.z.len() != d.r_c
        {
            return false;
        }
        let binaries_ok = self.binary_state_indices.iter().all(|&i| is_binary(pair.x[i]))
            && self.binary_input_indices.iter().all(|&i| is_binary(pair.u[i]))
            && pair.delta.iter().all(|&v| is_binary(v));
        let fixed =
            &pair.x - self.next_state(&pair.x, &pair.u, &pair.delta, &pair.z);
        binaries_ok
            && vec_inf_norm(fixed.as_slice()) <= tol
            && self.constraint_residual(&pair.x, &pair.u, &pair.delta, &pair.z) <= tol
    }

    pub fn simulate_open_loop(
        &self,
        x0: &Vector,
        inputs: &[Vector],
        opts: &StepOptions,
    ) -> Result<Trajectory> {
        let mut traj = Trajectory {
            states: vec![x0.clone()],
            ..Trajectory::default()
        };
        let mut x = x0.clone();
        for (k, u) in inputs.iter().enumerate() {
            match self.step(&x, u, opts) {
                Ok(out) => {
                    x = out.x_next.clone();
                    traj.states.push(out.x_next);
                    traj.outputs.push(out.y);
                    traj.deltas.push(out.delta);
                    traj.zs.push(out.z);
                }
                Err(Error::Infeasible(msg)) => {
                    warn!("open-loop simulation stopped at step {k}: {msg}");
                    traj.infeasible_at = Some(k);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(traj)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ModelFile = serde_json::from_str(text)?;
        let model = raw.into_model()?;
        model.validate().into_result()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelFile {
    A: Vec<Vec<f64>>,
    B1: Vec<Vec<f64>>,
    B2: Vec<Vec<f64>>,
    B3: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    D1: Vec<Vec<f64>>,
    D2: Vec<Vec<f64>>,
    D3: Vec<Vec<f64>>,
    E1: Vec<Vec<f64>>,
    E2: Vec<Vec<f64>>,
    E3: Vec<Vec<f64>>,
    E4: Vec<Vec<f64>>,
    E5: Vec<Vec<f64>>,
    dims: Dims,
    #[serde(default)]
    binary_state_indices: Vec<usize>,
    #[serde(default)]
    binary_input_indices: Vec<usize>,
}

impl From<&MldModel> for ModelFile {
    fn from(m: &MldModel) -> Self {
        Self {
            A: to_rows(&m.a),
            B1: to_rows(&m.b1),
            B2: to_rows(&m.b2),
            B3: to_rows(&m.b3),
            C: to_rows(&m.c),
            D1: to_rows(&m.d1),
            D2: to_rows(&m.d2),
            D3: to_rows(&m.d3),
            E1: to_rows(&m.e1),
            E2: to_rows(&m.e2),
            E3: to_rows(&m.e3),
            E4: to_rows(&m.e4),
            E5: m.e5.iter().map(|&v| vec![v]).collect(),
            dims: m.dims,
            binary_state_indices: m.binary_state_indices.clone(),
            binary_input_indices: m.binary_input_indices.clone(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<MldModel> {
        let d = self.dims;
        let (n, m) = (d.n(), d.m());
        let parse = |name: &str, rows: &[Vec<f64>], ncols: usize| {
            from_rows(rows, ncols).map_err(|e| Error::Format(format!("{name}: {e}")))
        };
        let e5 = parse("E5", &self.E5, 1)?;
        Ok(MldModel {
            a: parse("A", &self.A, n)?,
            b1: parse("B1", &self.B1, m)?,
            b2: parse("B2", &self.B2, d.r_l)?,
            b3: parse("B3", &self.B3, d.r_c)?,
            c: parse("C", &self.C, n)?,
            d1: parse("D1", &self.D1, m)?,
            d2: parse("D2", &self.D2, d.r_l)?,
            d3: parse("D3", &self.D3, d.r_c)?,
            e1: parse("E1", &self.E1, m)?,
            e2: parse("E2", &self.E2, d.r_l)?,
            e3: parse("E3", &self.E3, d.r_c)?,
            e4: parse("E4", &self.E4, n)?,
            e5: e5.column(0).into_owned(),
            dims: d,
            binary_state_indices: self.binary_state_indices,
            binary_input_indices: self.binary_input_indices,
        })
    }
}
