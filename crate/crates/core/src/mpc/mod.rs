//! Receding-horizon control of MLD models.
//!
//! Three controllers share one condensed problem: a terminal equality
//! `x_{N|t} = x_e`, the Lyapunov decrease constraint with a quadratic cost,
//! and the same constraint as a pure feasibility problem that takes the
//! first integer-feasible point.

pub mod condense;
mod log;
pub mod region;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, min_sym_eigenvalue, to_rows, Mat, Vector};
use crate::lyapunov::{check_certificate, LyapunovCertificate};
use crate::miqp::{self, SolveMode, SolveStats, SolveStatus, SolverOpts};
use crate::mld::MldModel;

pub use condense::{
    attach_constraints, build_cost, build_prediction, CondensedMiqp, Cost, CostTerms, Layout,
    Prediction, Terminal,
};
pub use log::{ClosedLoopLog, LogShape, StepRecord};
pub use region::{probe_region, region_csv, GridSpec, RegionPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "terminal-equality", alias = "terminal")]
    TerminalEquality,
    #[serde(rename = "lyapunov-optimal")]
    LyapunovOptimal,
    #[serde(rename = "lyapunov-feasible")]
    LyapunovFeasible,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::TerminalEquality => "terminal-equality",
            Self::LyapunovOptimal => "lyapunov-optimal",
            Self::LyapunovFeasible => "lyapunov-feasible",
        }
    }

    pub fn needs_certificate(self) -> bool {
        !matches!(self, Self::TerminalEquality)
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "terminal-equality" | "terminal" => Ok(Self::TerminalEquality),
            "lyapunov-optimal" => Ok(Self::LyapunovOptimal),
            "lyapunov-feasible" => Ok(Self::LyapunovFeasible),
            other => Err(format!(
                "unknown variant `{other}` (terminal-equality, lyapunov-optimal, lyapunov-feasible)"
            )),
        }
    }
}

/// A weight given either as a scalar multiple of the identity or in full.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Weight {
    pub fn resolve(&self, dim: usize, name: &str) -> Result<Mat> {
        let q = match self {
            Self::Scalar(s) => Mat::identity(dim, dim) * *s,
            Self::Matrix(rows) => {
                from_rows(rows, dim).map_err(|e| Error::Format(format!("{name}: {e}")))?
            }
        };
        if q.nrows() != dim {
            return Err(Error::Dimension(format!("{name} must be {dim}x{dim}")));
        }
        if dim > 0 {
            if (&q - q.transpose()).amax() > 1e-12 * (1.0 + q.amax()) {
                return Err(Error::Invalid(format!("{name} is not symmetric")));
            }
            let e = min_sym_eigenvalue(&q);
            if e < -1e-10 {
                return Err(Error::Invalid(format!(
                    "{name} is not positive semidefinite (eigenvalue {e:e})"
                )));
            }
        }
        Ok(q)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Equilibrium {
    pub x: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

fn target(v: &Option<Vec<f64>>, dim: usize, name: &str) -> Result<Vector> {
    match v {
        None => Ok(Vector::zeros(dim)),
        Some(v) if v.len() == dim => Ok(Vector::from_column_slice(v)),
        Some(v) => Err(Error::Dimension(format!(
            "target {name} has {} entries, expected {dim}",
            v.len()
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSpec {
    #[serde(rename = "Y")]
    pub y: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl CertificateSpec {
    pub fn from_certificate(cert: &LyapunovCertificate) -> Self {
        Self {
            y: to_rows(cert.y()),
            gamma: cert.gamma(),
        }
    }

    pub fn resolve(&self, n: usize) -> Result<LyapunovCertificate> {
        let y = from_rows(&self.y, n).map_err(|e| Error::Format(format!("Y: {e}")))?;
        check_certificate(&y, self.gamma).map_err(|e| Error::Invalid(e.to_string()))
    }
}

/// Controller configuration as stored in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(rename = "Q1", default = "zero_weight")]
    pub q1: Weight,
    #[serde(rename = "Q2", default = "zero_weight")]
    pub q2: Weight,
    #[serde(rename = "Q3", default = "zero_weight")]
    pub q3: Weight,
    #[serde(rename = "Q4", default = "zero_weight")]
    pub q4: Weight,
    #[serde(rename = "Q5", default = "zero_weight")]
    pub q5: Weight,
    #[serde(default)]
    pub equilibrium: Equilibrium,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSpec>,
    #[serde(default)]
    pub solver: SolverOpts,
}

fn zero_weight() -> Weight {
    Weight::Scalar(0.0)
}

impl ControllerSpec {
    pub fn new(variant: Variant, horizon: usize) -> Self {
        Self {
            variant,
            horizon,
            q1: zero_weight(),
            q2: zero_weight(),
            q3: zero_weight(),
            q4: zero_weight(),
            q5: zero_weight(),
            equilibrium: Equilibrium::default(),
            certificate: None,
            solver: SolverOpts::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("controller spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn cost_terms(&self, model: &MldModel) -> Result<CostTerms> {
        let d = model.dims;
        let e = &self.equilibrium;
        Ok(CostTerms {
            q1: self.q1.resolve(d.m(), "Q1")?,
            q2: self.q2.resolve(d.r_l, "Q2")?,
            q3: self.q3.resolve(d.r_c, "Q3")?,
            q4: self.q4.resolve(d.n(), "Q4")?,
            q5: self.q5.resolve(d.p(), "Q5")?,
            u_e: target(&e.u, d.m(), "u")?,
            delta_e: target(&e.delta, d.r_l, "delta")?,
            z_e: target(&e.z, d.r_c, "z")?,
            x_e: target(&e.x, d.n(), "x")?,
            y_e: target(&e.y, d.p(), "y")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlResult {
    pub status: SolveStatus,
    /// Full optimizer; zeros when infeasible.
    pub sequence: Vector,
    pub u: Vector,
    pub delta: Vector,
    pub z: Vector,
    /// Cost of the returned sequence including the constant terms; `None`
    /// for the feasibility controller.
    pub objective: Option<f64>,
    pub stats: SolveStats,
}

impl ControlResult {
    pub fn feasible(&self) -> bool {
        self.status.has_solution()
    }
}

/// A spec bound to a model with its condensed problem prebuilt.
#[derive(Clone, Debug)]
pub struct Controller {
    pub spec: ControllerSpec,
    pub model: MldModel,
    pub prediction: Prediction,
    pub problem: CondensedMiqp,
    certificate: Option<LyapunovCertificate>,
}

impl Controller {
    pub fn new(spec: ControllerSpec, model: MldModel) -> Result<Self> {
        model.validate().into_result()?;
        if spec.horizon == 0 {
            return Err(Error::Invalid("horizon N must be at least 1".into()));
        }
        let n = model.dims.n();
        let terms = spec.cost_terms(&model)?;
        let certificate = match (&spec.certificate, spec.variant.needs_certificate()) {
            (Some(c), _) => Some(c.resolve(n)?),
            (None, true) => {
                return Err(Error::Invalid(format!(
                    "variant {} needs a certificate",
                    spec.variant.name()
                )))
            }
            (None, false) => None,
        };
        let prediction = build_prediction(&model, spec.horizon);
        let cost = build_cost(&terms, &model, &prediction);
        let terminal = match spec.variant {
            Variant::TerminalEquality => Terminal::Equality(terms.x_e.clone()),
            _ => Terminal::Decrease(certificate.clone().expect("checked above")),
        };
        let problem = attach_constraints(&model, &prediction, cost, &terminal);
        Ok(Self {
            spec,
            model,
            prediction,
            problem,
            certificate,
        })
    }

    pub fn certificate(&self) -> Option<&LyapunovCertificate> {
        self.certificate.as_ref()
    }

    fn solver_opts(&self) -> SolverOpts {
        let mut o = self.spec.solver.clone();
        if self.spec.variant == Variant::LyapunovFeasible {
            o.mode = SolveMode::FirstFeasible;
        }
        o
    }

    pub fn solve_step(&self, x: &Vector) -> Result<ControlResult> {
        if x.len() != self.model.dims.n() {
            return Err(Error::Dimension(format!(
                "state has {} entries, model has {}",
                x.len(),
                self.model.dims.n()
            )));
        }
        let with_cost = self.spec.variant != Variant::LyapunovFeasible;
        let p = self.problem.at(x, with_cost);
        let sol = miqp::solve(&p, &self.solver_opts())?;
        let layout = self.problem.layout;
        let slice = |r: std::ops::Range<usize>| sol.u.rows(r.start, r.len()).into_owned();
        let feasible = sol.status.has_solution();
        Ok(ControlResult {
            status: sol.status,
            u: slice(layout.u(0)),
            delta: slice(layout.delta(0)),
            z: slice(layout.z(0)),
            objective: (feasible && with_cost).then_some(sol.objective),
            sequence: sol.u,
            stats: sol.stats,
        })
    }

    /// Runs `steps` receding-horizon iterations with the model as plant.
    /// `disturbance(t)` is added to the state update when given.
    pub fn run(
        &self,
        x0: &Vector,
        steps: usize,
        disturbance: Option<&dyn Fn(usize) -> Vector>,
    ) -> Result<ClosedLoopLog> {
        let d = self.model.dims;
        let mut log = ClosedLoopLog::new(LogShape {
            n: d.n(),
            m: d.m(),
            r_l: d.r_l,
            r_c: d.r_c,
        });
        let v_of = |x: &Vector| self.certificate.as_ref().map(|c| c.v(x));
        let mut x = x0.clone();
        for t in 0..steps {
            let start = Instant::now();
            let res = self.solve_step(&x)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            if !res.feasible() {
                ::log::warn!("step {t}: controller problem {:?}; stopping", res.status);
                log.records.push(StepRecord {
                    t,
                    x: x.clone(),
                    u: Vector::zeros(0),
                    delta: Vector::zeros(0),
                    z: Vector::zeros(0),
                    y: Vector::zeros(0),
                    v: v_of(&x),
                    j: None,
                    status: res.status,
                    nodes: res.stats.nodes,
                    ms,
                });
                return Ok(log);
            }
            let y = self.model.output(&x, &res.u, &res.delta, &res.z);
            let mut next = self.model.next_state(&x, &res.u, &res.delta, &res.z);
            if let Some(w) = disturbance {
                next += w(t);
            }
            log.records.push(StepRecord {
                t,
                x: x.clone(),
                u: res.u,
                delta: res.delta,
                z: res.z,
                y,
                v: v_of(&x),
                j: res.objective,
                status: res.status,
                nodes: res.stats.nodes,
                ms,
            });
            x = next;
        }
        log.final_v = v_of(&x);
        log.final_state = Some(x);
        Ok(log)
    }
}

/// Builds a controller and runs it.
pub fn run_rhc(
    spec: &ControllerSpec,
    model: &MldModel,
    x0: &Vector,
    steps: usize,
) -> Result<ClosedLoopLog> {
    Controller::new(spec.clone(), model.clone())?.run(x0, steps, None)
}

/// Evaluates the stage cost directly by simulating the predictions.
pub fn direct_cost(terms: &CostTerms, model: &MldModel, x: &Vector, u_seq: &Vector, horizon: usize) -> f64 {
    let layout = Layout::new(model, horizon);
    let sq = |v: Vector, q: &Mat| v.dot(&(q * &v));
    let mut xk = x.clone();
    let mut j = 0.0;
    for k in 0..horizon {
        let part = |r: std::ops::Range<usize>| u_seq.rows(r.start, r.len()).into_owned();
        let (u, d, z) = (part(layout.u(k)), part(layout.delta(k)), part(layout.z(k)));
        let y = model.output(&xk, &u, &d, &z);
        j += sq(&u - &terms.u_e, &terms.q1)
            + sq(&d - &terms.delta_e, &terms.q2)
            + sq(&z - &terms.z_e, &terms.q3)
            + sq(&xk - &terms.x_e, &terms.q4)
            + sq(y - &terms.y_e, &terms.q5);
        xk = model.next_state(&xk, &u, &d, &z);
    }
    j
}
