//! Quarter-car semi-active suspension benchmark.
//!
//! States are tire deflection, unsprung-mass velocity, suspension deflection
//! and sprung-mass velocity; the input is the normalized damper force `f`.
//! The damper can only dissipate: `f (x4 - x2) >= 0`, `|f| <= sigma` and
//! `f (x4 - x2) <= c (x4 - x2)^2` with `c = 2 zeta_max w_s`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::logic::{
    assemble, encode_iff_binary, encode_iff_threshold, encode_le, encode_piecewise, LinExpr,
    VarBox, VarTable, DEFAULT_EPS,
};
use crate::mld::{Dims, MldModel};

mod experiment;

pub use experiment::*;

/// How the frequencies in the parameter table are read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnits {
    /// `w = 2 pi f`.
    #[default]
    Hertz,
    /// The table values are used as angular frequencies directly.
    RadPerSec,
}

/// Which frequency enters the tire-stiffness entry `A[1][0]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StiffnessEntry {
    /// `-w_us^2`, the unsprung-mass frequency.
    #[default]
    Unsprung,
    /// `-w_s^2`, reading the printed subscript as the sprung mass.
    Sprung,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuspensionParams {
    /// Sample time in seconds.
    pub ts: f64,
    pub f_s: f64,
    pub f_us: f64,
    /// Sprung to unsprung mass ratio.
    pub rho: f64,
    /// Nominal damping ratio.
    pub zeta: f64,
    pub zeta_max: f64,
    /// Force saturation.
    pub sigma: f64,
    #[serde(rename = "N")]
    pub horizon: usize,
    /// Symmetric bound on every state, used for the big-M constants.
    pub state_box: f64,
    pub units: FrequencyUnits,
    pub stiffness: StiffnessEntry,
}

impl Default for SuspensionParams {
    fn default() -> Self {
        Self {
            ts: 0.009,
            f_s: 1.5,
            f_us: 9.0,
            rho: 10.0,
            zeta: 0.0,
            zeta_max: 2.25,
            sigma: 0.2,
            horizon: 5,
            state_box: 10.0,
            units: FrequencyUnits::Hertz,
            stiffness: StiffnessEntry::Unsprung,
        }
    }
}

impl SuspensionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ts", self.ts),
            ("f_s", self.f_s),
            ("f_us", self.f_us),
            ("rho", self.rho),
            ("sigma", self.sigma),
            ("state_box", self.state_box),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.zeta >= 0.0 && self.zeta_max > self.zeta && self.zeta_max.is_finite()) {
            return Err(Error::Invalid(format!(
                "need 0 <= zeta < zeta_max, got zeta = {}, zeta_max = {}",
                self.zeta, self.zeta_max
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Invalid("N must be at least 1".into()));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        match self.units {
            FrequencyUnits::Hertz => 2.0 * std::f64::consts::PI,
            FrequencyUnits::RadPerSec => 1.0,
        }
    }

    pub fn omega_s(&self) -> f64 {
        self.scale() * self.f_s
    }

    pub fn omega_us(&self) -> f64 {
        self.scale() * self.f_us
    }

    /// Maximum damping gain `2 zeta_max w_s`.
    pub fn max_gain(&self) -> f64 {
        2.0 * self.zeta_max * self.omega_s()
    }

    /// One-line description of the modelling assumptions in force.
    pub fn assumptions(&self) -> String {
        format!(
            "units={:?}, stiffness={:?}, zeta={}, ts={}, state_box={}",
            self.units, self.stiffness, self.zeta, self.ts, self.state_box
        )
    }
}

/// Continuous-time `(A, B)` of the quarter-car model.
pub fn build_continuous(p: &SuspensionParams) -> (Mat, Mat) {
    let ws = p.omega_s();
    let w_tire = match p.stiffness {
        StiffnessEntry::Unsprung => p.omega_us(),
        StiffnessEntry::Sprung => ws,
    };
    let (rho, zeta) = (p.rho, p.zeta);
    #[rustfmt::skip]
    let a = Mat::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        -w_tire * w_tire, -2.0 * rho * zeta * ws, rho * ws * ws, 2.0 * rho * zeta * ws,
        0.0, -1.0, 0.0, 1.0,
        0.0, 2.0 * zeta * ws, -ws * ws, -2.0 * zeta * ws,
    ]);
    let b = Mat::from_column_slice(4, 1, &[0.0, rho, 0.0, -1.0]);
    (a, b)
}

/// Zero-order-hold discretization from the exponential of `[[A, B], [0, 0]] ts`,
/// computed by scaling and squaring a Taylor series.
pub fn discretize(a: &Mat, b: &Mat, ts: f64) -> (Mat, Mat) {
    let (n, m) = (a.nrows(), b.ncols());
    let mut aug = Mat::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * ts));
    let e = expm(&aug);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

fn expm(m: &Mat) -> Mat {
    let norm = crate::linalg::mat_inf_norm(m);
    let mut squarings = 0;
    while norm / f64::powi(2.0, squarings) > 0.25 {
        squarings += 1;
    }
    let scaled = m / f64::powi(2.0, squarings);
    let dim = m.nrows();
    let mut sum = Mat::identity(dim, dim);
    let mut term = Mat::identity(dim, dim);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub const INPUT: &str = "f";
pub const DELTA_VELOCITY: &str = "d1";
pub const DELTA_FORCE: &str = "d2";
pub const SLACK: &str = "F";
pub const STATES: [&str; 4] = ["x1", "x2", "x3", "x4"];

/// Relative velocity `x4 - x2`.
fn relative_velocity() -> LinExpr {
    LinExpr::var(STATES[3]).plus(STATES[1], -1.0)
}

/// Declared variables and the big-M box.
fn variables(p: &SuspensionParams) -> Result<(VarTable, VarBox)> {
    let mut vars = VarTable::new();
    vars.input(INPUT)
        .binary(DELTA_VELOCITY)
        .binary(DELTA_FORCE)
        .aux(SLACK);
    for s in STATES {
        vars.state(s);
    }
    let mut bx = VarBox::new().with(INPUT, -p.sigma, p.sigma)?;
    for s in STATES {
        bx.set(s, -p.state_box, p.state_box)?;
    }
    Ok((vars, bx))
}

/// Discretized dynamics plus the damper constraints in mixed-integer form.
///
/// Binaries are `(d1, d2)` with `d1 <-> x4 - x2 >= 0` and `d2 <-> f >= 0`;
/// auxiliaries are `(F, F_p0, F_p1)` where `F` is the dissipation slack and
/// the other two are the products behind its piecewise definition.
pub fn build_mld(p: &SuspensionParams) -> Result<MldModel> {
    p.validate()?;
    let (a, b) = build_continuous(p);
    let (ad, bd) = discretize(&a, &b, p.ts);
    let (vars, bx) = variables(p)?;
    let c = p.max_gain();
    let v = relative_velocity();
    let f = LinExpr::var(INPUT);
    let branch0 = f.clone().sum(&v.clone().scale(-c));
    let branch1 = branch0.clone().scale(-1.0);
    let systems = [
        encode_iff_threshold(&vars, DELTA_VELOCITY, &v, &bx, DEFAULT_EPS)?,
        encode_iff_threshold(&vars, DELTA_FORCE, &f, &bx, DEFAULT_EPS)?,
        encode_iff_binary(&vars, DELTA_VELOCITY, DELTA_FORCE)?,
        encode_piecewise(&vars, SLACK, DELTA_VELOCITY, &branch0, &branch1, &bx)?,
        encode_le(&vars, &LinExpr::term(SLACK, -1.0))?,
        encode_le(&vars, &f.clone().sum(&LinExpr::constant(-p.sigma)))?,
        encode_le(&vars, &f.scale(-1.0).sum(&LinExpr::constant(-p.sigma)))?,
    ];
    let asm = assemble(&systems, &vars)?;
    debug_assert_eq!(asm.states, STATES.map(String::from));
    let q = asm.e5.len();
    let (r_l, r_c) = (asm.binaries.len(), asm.auxiliaries.len());
    let model = MldModel {
        a: ad,
        b1: bd,
        b2: Mat::zeros(4, r_l),
        b3: Mat::zeros(4, r_c),
        c: Mat::identity(4, 4),
        d1: Mat::zeros(4, 1),
        d2: Mat::zeros(4, r_l),
        d3: Mat::zeros(4, r_c),
        e1: asm.e1,
        e2: asm.e2,
        e3: asm.e3,
        e4: asm.e4,
        e5: asm.e5,
        dims: Dims {
            n_c: 4,
            m_c: 1,
            p_c: 4,
            r_l,
            r_c,
            q_e: q,
            ..Dims::default()
        },
        binary_state_indices: Vec::new(),
        binary_input_indices: Vec::new(),
    };
    model.validate().into_result()?;
    Ok(model)
}

/// The damper constraints checked directly on `(x, f)`. `x4 - x2 < 0` is
/// read as `x4 - x2 <= -eps` and `f < 0` as `f <= -eps`, the conventions of
/// the indicator encodings; the quadratic bound is taken in its divided
/// form `f <= c v` for `v >= 0` and `f >= c v` for `v < 0`.
pub fn damper_admissible(p: &SuspensionParams, x: &Vector, f: f64) -> bool {
    let v = x[3] - x[1];
    let c = p.max_gain();
    let in_box = x.iter().all(|s| s.abs() <= p.state_box);
    let force_ok = f.abs() <= p.sigma;
    let branch_ok = if v >= 0.0 {
        f >= 0.0 && f <= c * v
    } else if v <= -DEFAULT_EPS {
        f <= -DEFAULT_EPS && f >= c * v
    } else {
        false
    };
    in_box && force_ok && branch_ok && f * v >= 0.0 && f * v <= c * v * v
}

/// Binaries and auxiliaries implied by an admissible `(x, f)`, in model order.
pub fn implied_logic(p: &SuspensionParams, x: &Vector, f: f64) -> (Vector, Vector) {
    let v = x[3] - x[1];
    let c = p.max_gain();
    let d = if v >= 0.0 { 1.0 } else { 0.0 };
    let b0 = f - c * v;
    let b1 = -b0;
    let big_f = if d == 1.0 { b1 } else { b0 };
    (
        Vector::from_column_slice(&[d, d]),
        Vector::from_column_slice(&[big_f, d * b0, d * b1]),
    )
}

/// Loads parameters from JSON; missing fields take the table defaults.
pub fn load_params(path: &Path) -> Result<SuspensionParams> {
    let p: SuspensionParams = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    p.validate()?;
    Ok(p)
}
