//! Condensed finite-horizon problem over the stacked decision vector
//! `U = [u_0 .. u_{N-1}, delta_0 .. delta_{N-1}, z_0 .. z_{N-1}]`.

use std::ops::Range;

use crate::linalg::{vstack, Mat, Vector};
use crate::lyapunov::{decrease_rows, LyapunovCertificate};
use crate::miqp::MiqpProblem;
use crate::mld::MldModel;

/// Slack on each side of the terminal equality rows.
pub const TERMINAL_SLACK: f64 = 1e-7;

/// Column layout of `U`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub horizon: usize,
    pub m: usize,
    pub r_l: usize,
    pub r_c: usize,
}

impl Layout {
    pub fn new(model: &MldModel, horizon: usize) -> Self {
        Self {
            horizon,
            m: model.dims.m(),
            r_l: model.dims.r_l,
            r_c: model.dims.r_c,
        }
    }

    pub fn dim(&self) -> usize {
        self.horizon * (self.m + self.r_l + self.r_c)
    }

    pub fn u(&self, k: usize) -> Range<usize> {
        k * self.m..(k + 1) * self.m
    }

    pub fn delta(&self, k: usize) -> Range<usize> {
        let base = self.horizon * self.m;
        base + k * self.r_l..base + (k + 1) * self.r_l
    }

    pub fn z(&self, k: usize) -> Range<usize> {
        let base = self.horizon * (self.m + self.r_l);
        base + k * self.r_c..base + (k + 1) * self.r_c
    }

    /// Binary columns: every `delta_k` plus binary inputs.
    pub fn binaries(&self, binary_inputs: &[usize]) -> Vec<usize> {
        let mut b: Vec<usize> = (0..self.horizon)
            .flat_map(|k| binary_inputs.iter().map(move |&i| k * self.m + i))
            .collect();
        b.extend(self.horizon * self.m..self.horizon * (self.m + self.r_l));
        b.sort_unstable();
        b
    }

    /// Selector `S` with `S U = (u_k, delta_k, z_k)`.
    pub fn first_move_selector(&self, k: usize) -> Mat {
        let w = self.m + self.r_l + self.r_c;
        let mut s = Mat::zeros(w, self.dim());
        for (row, col) in self
            .u(k)
            .chain(self.delta(k))
            .chain(self.z(k))
            .enumerate()
        {
            s[(row, col)] = 1.0;
        }
        s
    }
}

/// Affine maps from `(x_t, U)` to predicted states and outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub layout: Layout,
    /// `x_{k|t} = state_x[k] x_t + state_u[k] U` for `k = 0..=N`.
    pub state_x: Vec<Mat>,
    pub state_u: Vec<Mat>,
    /// `y_{k|t} = output_x[k] x_t + output_u[k] U` for `k = 0..N`.
    pub output_x: Vec<Mat>,
    pub output_u: Vec<Mat>,
}

impl Prediction {
    /// Stacked `x_{1|t} .. x_{N|t}`.
    pub fn stacked_states(&self) -> (Mat, Mat) {
        let xs: Vec<&Mat> = self.state_x[1..].iter().collect();
        let us: Vec<&Mat> = self.state_u[1..].iter().collect();
        (vstack(&xs), vstack(&us))
    }

    pub fn state(&self, k: usize, x: &Vector, u: &Vector) -> Vector {
        &self.state_x[k] * x + &self.state_u[k] * u
    }

    pub fn output(&self, k: usize, x: &Vector, u: &Vector) -> Vector {
        &self.output_x[k] * x + &self.output_u[k] * u
    }
}

pub fn build_prediction(model: &MldModel, horizon: usize) -> Prediction {
    let layout = Layout::new(model, horizon);
    let n = model.dims.n();
    let d = layout.dim();
    let mut state_x = vec![Mat::identity(n, n)];
    let mut state_u = vec![Mat::zeros(n, d)];
    let mut output_x = Vec::with_capacity(horizon);
    let mut output_u = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let mut drive = Mat::zeros(n, d);
        let mut feed = Mat::zeros(model.dims.p(), d);
        for (range, b, dm) in [
            (layout.u(k), &model.b1, &model.d1),
            (layout.delta(k), &model.b2, &model.d2),
            (layout.z(k), &model.b3, &model.d3),
        ] {
            drive.columns_mut(range.start, range.len()).copy_from(b);
            feed.columns_mut(range.start, range.len()).copy_from(dm);
        }
        output_x.push(&model.c * &state_x[k]);
        output_u.push(&model.c * &state_u[k] + feed);
        let next_x = &model.a * &state_x[k];
        let next_u = &model.a * &state_u[k] + drive;
        state_x.push(next_x);
        state_u.push(next_u);
    }
    Prediction {
        layout,
        state_x,
        state_u,
        output_x,
        output_u,
    }
}

/// Weights and targets of the stage cost.
#[derive(Clone, Debug, PartialEq)]
pub struct CostTerms {
    pub q1: Mat,
    pub q2: Mat,
    pub q3: Mat,
    pub q4: Mat,
    pub q5: Mat,
    pub u_e: Vector,
    pub delta_e: Vector,
    pub z_e: Vector,
    pub x_e: Vector,
    pub y_e: Vector,
}

/// `J(U, x) = 1/2 U'HU + x'F U + f0'U + x'Cxx x + cx'x + c0`
#[derive(Clone, Debug, PartialEq)]
pub struct Cost {
    pub h: Mat,
    pub f: Mat,
    pub f0: Vector,
    pub c_xx: Mat,
    pub c_x: Vector,
    pub c0: f64,
}

impl Cost {
    pub fn gradient(&self, x: &Vector) -> Vector {
        self.f.transpose() * x + &self.f0
    }

    pub fn constant(&self, x: &Vector) -> f64 {
        x.dot(&(&self.c_xx * x)) + self.c_x.dot(x) + self.c0
    }

    pub fn value(&self, u: &Vector, x: &Vector) -> f64 {
        0.5 * u.dot(&(&self.h * u)) + self.gradient(x).dot(u) + self.constant(x)
    }

    fn zero(n: usize, d: usize) -> Self {
        Self {
            h: Mat::zeros(d, d),
            f: Mat::zeros(n, d),
            f0: Vector::zeros(d),
            c_xx: Mat::zeros(n, n),
            c_x: Vector::zeros(n),
            c0: 0.0,
        }
    }

    /// Adds `|| M U + N x - r ||^2_Q`.
    fn add_square(&mut self, m: &Mat, nx: &Mat, r: &Vector, q: &Mat) {
        if q.iter().all(|&v| v == 0.0) {
            return;
        }
        let qm = q * m;
        let qn = q * nx;
        self.h += m.transpose() * &qm * 2.0;
        self.f += nx.transpose() * &qm * 2.0;
        self.f0 -= qm.transpose() * r * 2.0;
        self.c_xx += nx.transpose() * &qn;
        self.c_x -= qn.transpose() * r * 2.0;
        self.c0 += r.dot(&(q * r));
    }
}

/// Expands the stage cost summed over `k = 0..N-1`.
pub fn build_cost(terms: &CostTerms, model: &MldModel, pred: &Prediction) -> Cost {
    let layout = pred.layout;
    let n = model.dims.n();
    let d = layout.dim();
    let mut cost = Cost::zero(n, d);
    let zero_x = |rows: usize| Mat::zeros(rows, n);
    for k in 0..layout.horizon {
        let sel = |range: Range<usize>| {
            let mut s = Mat::zeros(range.len(), d);
            for (i, c) in range.enumerate() {
                s[(i, c)] = 1.0;
            }
            s
        };
        cost.add_square(&sel(layout.u(k)), &zero_x(layout.m), &terms.u_e, &terms.q1);
        cost.add_square(&sel(layout.delta(k)), &zero_x(layout.r_l), &terms.delta_e, &terms.q2);
        cost.add_square(&sel(layout.z(k)), &zero_x(layout.r_c), &terms.z_e, &terms.q3);
        cost.add_square(&pred.state_u[k], &pred.state_x[k], &terms.x_e, &terms.q4);
        cost.add_square(&pred.output_u[k], &pred.output_x[k], &terms.y_e, &terms.q5);
    }
    // Symmetrize against roundoff.
    cost.h = (&cost.h + cost.h.transpose()) * 0.5;
    cost.c_xx = (&cost.c_xx + cost.c_xx.transpose()) * 0.5;
    cost
}

/// Extra rows at the end of the condensed problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Terminal {
    None,
    /// `x_{N|t} = x_e` as paired inequalities.
    Equality(Vector),
    Decrease(LyapunovCertificate),
}

/// `Phi U <= phi0 + phi_x x + bound(x) * mask`, where the last term is
/// the nonlinear `V(x) - gamma ||x||_inf` of the decrease rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedMiqp {
    pub cost: Cost,
    pub phi: Mat,
    pub phi0: Vector,
    pub phi_x: Mat,
    pub binary: Vec<usize>,
    /// Rows encoding the terminal equality, if any.
    pub equality_rows: Range<usize>,
    /// Rows carrying the decrease constraint, if any.
    pub decrease_rows: Range<usize>,
    pub certificate: Option<LyapunovCertificate>,
    pub layout: Layout,
}

impl CondensedMiqp {
    pub fn rhs(&self, x: &Vector) -> Vector {
        let mut b = &self.phi0 + &self.phi_x * x;
        if let Some(cert) = &self.certificate {
            let bound = cert.v(x) - cert.gamma() * crate::linalg::vec_inf_norm(x.as_slice());
            for r in self.decrease_rows.clone() {
                b[r] += bound;
            }
        }
        b
    }

    /// Standard form at state `x`. `with_cost = false` drops the objective.
    pub fn at(&self, x: &Vector, with_cost: bool) -> MiqpProblem {
        let d = self.layout.dim();
        let (h, f, constant) = if with_cost {
            (self.cost.h.clone(), self.cost.gradient(x), self.cost.constant(x))
        } else {
            (Mat::zeros(d, d), Vector::zeros(d), 0.0)
        };
        let mut p = MiqpProblem::new(h, f, self.phi.clone(), self.rhs(x), self.binary.clone());
        p.constant = constant;
        p
    }
}

/// Replicated model rows plus the terminal rows.
pub fn attach_constraints(
    model: &MldModel,
    pred: &Prediction,
    cost: Cost,
    terminal: &Terminal,
) -> CondensedMiqp {
    let layout = pred.layout;
    let n = model.dims.n();
    let d = layout.dim();
    let q = model.dims.q_e;
    let mut blocks_phi = Vec::new();
    let mut blocks_phi0 = Vec::new();
    let mut blocks_phix = Vec::new();
    for k in 0..layout.horizon {
        // E2 delta_k + E3 z_k - E1 u_k - E4 x_k <= E5
        let mut row = -&model.e4 * &pred.state_u[k];
        for (range, e, sign) in [
            (layout.u(k), &model.e1, -1.0),
            (layout.delta(k), &model.e2, 1.0),
            (layout.z(k), &model.e3, 1.0),
        ] {
            let mut cols = row.columns_mut(range.start, range.len());
            cols += e * sign;
        }
        blocks_phi.push(row);
        blocks_phi0.push(model.e5.clone());
        blocks_phix.push(&model.e4 * &pred.state_x[k]);
    }
    let model_rows = layout.horizon * q;
    let mut equality_rows = model_rows..model_rows;
    let mut dec_rows = model_rows..model_rows;
    let mut certificate = None;
    match terminal {
        Terminal::None => {}
        Terminal::Equality(x_e) => {
            let su = &pred.state_u[layout.horizon];
            let sx = &pred.state_x[layout.horizon];
            blocks_phi.push(su.clone());
            blocks_phi0.push(x_e.map(|v| v + TERMINAL_SLACK));
            blocks_phix.push(-sx);
            blocks_phi.push(-su);
            blocks_phi0.push(x_e.map(|v| -v + TERMINAL_SLACK));
            blocks_phix.push(sx.clone());
            equality_rows = model_rows..model_rows + 2 * n;
        }
        Terminal::Decrease(cert) => {
            // Rows at x = 0 give the state-independent matrix; the drift
            // term is affine in x and the bound is added in `rhs`.
            let rows = decrease_rows(cert, model, &Vector::zeros(n));
            let sel = layout.first_move_selector(0);
            blocks_phi.push(&rows.matrix * sel);
            let c = cert.row_count();
            blocks_phi0.push(Vector::zeros(2 * c));
            let ya = cert.y() * &model.a;
            blocks_phix.push(vstack(&[&(-&ya), &ya]));
            dec_rows = model_rows..model_rows + 2 * c;
            certificate = Some(cert.clone());
        }
    }
    let phi = vstack(&blocks_phi.iter().collect::<Vec<_>>());
    let phi_x = vstack(&blocks_phix.iter().collect::<Vec<_>>());
    let phi0 = Vector::from_iterator(
        phi.nrows(),
        blocks_phi0.iter().flat_map(|v| v.iter().copied()),
    );
    debug_assert_eq!(phi.ncols(), d);
    CondensedMiqp {
        cost,
        phi,
        phi0,
        phi_x: if phi_x.nrows() == 0 { Mat::zeros(0, n) } else { phi_x },
        binary: layout.binaries(&model.binary_input_indices),
        equality_rows,
        decrease_rows: dec_rows,
        certificate,
        layout,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64) -> MldModel {
        MldModel::linear(
            Mat::from_element(1, 1, a),
            Mat::from_element(1, 1, 1.0),
            Mat::identity(1, 1),
            Mat::zeros(1, 1),
        )
    }

    #[test]
    fn one_step_map_is_the_model() {
        let m = scalar(0.5);
        let p = build_prediction(&m, 1);
        assert_eq!(p.state_x[1], m.a);
        assert_eq!(p.state_u[1], m.b1);
    }

    #[test]
    fn three_step_free_response() {
        let p = build_prediction(&scalar(0.5), 3);
        assert_eq!(p.state_x[3][(0, 0)], 0.125);
        assert_eq!(p.state_u[3].as_slice(), &[0.25, 0.5, 1.0]);
    }

    fn terms(model: &MldModel, q1: f64, q4: f64) -> CostTerms {
        let d = model.dims;
        CostTerms {
            q1: Mat::identity(d.m(), d.m()) * q1,
            q2: Mat::zeros(d.r_l, d.r_l),
            q3: Mat::zeros(d.r_c, d.r_c),
            q4: Mat::identity(d.n(), d.n()) * q4,
            q5: Mat::zeros(d.p(), d.p()),
            u_e: Vector::zeros(d.m()),
            delta_e: Vector::zeros(d.r_l),
            z_e: Vector::zeros(d.r_c),
            x_e: Vector::zeros(d.n()),
            y_e: Vector::zeros(d.p()),
        }
    }

    #[test]
    fn pure_input_penalty() {
        let m = scalar(0.5);
        let p = build_prediction(&m, 3);
        let c = build_cost(&terms(&m, 1.0, 0.0), &m, &p);
        assert_eq!(c.h, Mat::identity(3, 3) * 2.0);
        assert!(c.f.iter().all(|&v| v == 0.0));
        let none = build_cost(&terms(&m, 0.0, 0.0), &m, &p);
        assert!(none.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn terminal_rows_pin_next_state() {
        let m = scalar(0.5);
        let p = build_prediction(&m, 1);
        let cost = build_cost(&terms(&m, 1.0, 1.0), &m, &p);
        let c = attach_constraints(&m, &p, cost, &Terminal::Equality(Vector::zeros(1)));
        assert_eq!(c.equality_rows, 0..2);
        let x = Vector::from_element(1, 0.4);
        let b = c.rhs(&x);
        // u <= -0.2 + slack and -u <= 0.2 + slack
        assert!((b[0] - (-0.2 + TERMINAL_SLACK)).abs() < 1e-15);
        assert!((b[1] - (0.2 + TERMINAL_SLACK)).abs() < 1e-15);
    }
}
