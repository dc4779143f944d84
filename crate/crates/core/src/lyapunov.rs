//! Infinity-norm Lyapunov functions `V(x) = ||Y x||_inf`.
//!
//! A certificate `(Y, gamma)` is admissible when `Y` has full column rank and
//! `gamma <= ||Y||_inf <= 1 + gamma`; its contraction factor is
//! `theta = ||Y||_inf - gamma`. Controllers impose the one-step decrease
//! `V(x+) <= V(x) - gamma ||x||_inf` as linear rows in the first move.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{mat_inf_norm, numerical_rank, spectral_radius, vec_inf_norm, Mat, Vector};
use crate::miqp::{QpKernel, QpSettings, QpStatus};
use crate::mld::MldModel;

/// Relative singular-value threshold for the rank condition.
pub const RANK_TOL: f64 = 1e-10;
/// Absolute slack for trajectory decrease checks.
pub const TRAJECTORY_TOL: f64 = 1e-6;
/// Default bound on the envelope's overshoot constant.
pub const ALPHA_MAX: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    #[serde(rename = "Y", with = "crate::linalg::rows_serde")]
    y: Mat,
    gamma: f64,
    #[serde(skip)]
    theta: f64,
}

impl LyapunovCertificate {
    pub fn y(&self) -> &Mat {
        &self.y
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn row_count(&self) -> usize {
        self.y.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_identity(&self) -> bool {
        self.y.is_square() && self.y == Mat::identity(self.y.nrows(), self.y.ncols())
    }

    /// `V(x) = ||Y x||_inf`
    pub fn v(&self, x: &Vector) -> f64 {
        v_eval(&self.y, x)
    }

    /// Re-runs the admissibility check, e.g. after deserialization.
    pub fn revalidate(self) -> Result<Self, ViolationReport> {
        check_certificate(&self.y, self.gamma)
    }
}

pub fn v_eval(y: &Mat, x: &Vector) -> f64 {
    vec_inf_norm((y * x).as_slice())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositiveGamma(f64),
    /// `||Y||_inf < gamma`
    NormBelowGamma { norm: f64, gamma: f64 },
    /// `||Y||_inf > 1 + gamma`
    NormAboveOnePlusGamma { norm: f64, gamma: f64 },
    RankDeficient { rank: usize, n: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositiveGamma(g) => write!(f, "gamma must be positive, got {g}"),
            Self::NormBelowGamma { norm, gamma } => {
                write!(f, "||Y||_inf = {norm} is below gamma = {gamma}")
            }
            Self::NormAboveOnePlusGamma { norm, gamma } => {
                write!(f, "||Y||_inf = {norm} exceeds 1 + gamma = {}", 1.0 + gamma)
            }
            Self::RankDeficient { rank, n } => write!(f, "rank(Y) = {rank} < {n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("certificate rejected: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

pub fn check_certificate(y: &Mat, gamma: f64) -> Result<LyapunovCertificate, ViolationReport> {
    let mut violations = Vec::new();
    let norm = mat_inf_norm(y);
    if !(gamma > 0.0) {
        violations.push(Violation::NonPositiveGamma(gamma));
    }
    if norm < gamma {
        violations.push(Violation::NormBelowGamma { norm, gamma });
    }
    if norm > 1.0 + gamma {
        violations.push(Violation::NormAboveOnePlusGamma { norm, gamma });
    }
    let n = y.ncols();
    let rank = numerical_rank(y, RANK_TOL);
    if n == 0 || rank < n {
        violations.push(Violation::RankDeficient { rank, n });
    }
    if violations.is_empty() {
        Ok(LyapunovCertificate {
            y: y.clone(),
            gamma,
            theta: norm - gamma,
        })
    } else {
        Err(ViolationReport { violations })
    }
}

/// Decrease constraint at a fixed `x_t`, over the first move `w = (u, delta, z)`:
/// `matrix * w <= rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecreaseRows {
    pub matrix: Mat,
    pub rhs: Vector,
    /// `V(x_t) - gamma ||x_t||_inf`
    pub bound: f64,
    /// Set when the bound is negative at a nonzero state: no successor can
    /// satisfy the rows. Advisory; the solver reports the infeasibility.
    pub rhs_negative: bool,
}

/// `+-Y (A x_t + B1 u + B2 delta + B3 z) <= V(x_t) - gamma ||x_t||_inf`
pub fn decrease_rows(cert: &LyapunovCertificate, model: &MldModel, x_t: &Vector) -> DecreaseRows {
    let y = &cert.y;
    let c = y.nrows();
    let bound = cert.v(x_t) - cert.gamma * vec_inf_norm(x_t.as_slice());
    let drift = y * (&model.a * x_t);
    let (m, rl, rc) = (model.dims.m(), model.dims.r_l, model.dims.r_c);
    let mut g = Mat::zeros(c, m + rl + rc);
    g.view_mut((0, 0), (c, m)).copy_from(&(y * &model.b1));
    g.view_mut((0, m), (c, rl)).copy_from(&(y * &model.b2));
    g.view_mut((0, m + rl), (c, rc)).copy_from(&(y * &model.b3));
    let matrix = crate::linalg::vstack(&[&g, &(-&g)]);
    let rhs = Vector::from_iterator(
        2 * c,
        drift
            .iter()
            .map(|d| bound - d)
            .chain(drift.iter().map(|d| bound + d)),
    );
    DecreaseRows {
        matrix,
        rhs,
        bound,
        rhs_negative: bound < 0.0 && vec_inf_norm(x_t.as_slice()) > 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOpts {
    /// Starting rows; identity when absent.
    #[serde(skip)]
    pub y0: Option<Mat>,
    /// Contraction factor targeted by the augmentation; `1 - 0.99 gamma`
    /// when absent.
    pub theta_target: Option<f64>,
    pub max_iters: usize,
}

impl Default for SynthOpts {
    fn default() -> Self {
        Self {
            y0: None,
            theta_target: None,
            max_iters: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SynthesisError {
    #[error("spectral radius {0} is not below one; no contraction exists")]
    NotStable(f64),
    #[error("contraction not certified after {iters} rounds ({rows} rows): {reason}")]
    Failed {
        iters: usize,
        rows: usize,
        reason: String,
    },
    #[error("invalid synthesis input: {0}")]
    Input(String),
}

/// Quantities behind a synthesized certificate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthesisReport {
    /// `max ||Y A x||_inf` over `||Y x||_inf <= 1`.
    pub contraction: f64,
    /// `min ||Y x||_inf` over `||x||_inf = 1`.
    pub min_gain: f64,
    /// `||Y A||_inf`
    pub one_step_gain: f64,
    pub iterations: usize,
    pub rows: usize,
    pub scale: f64,
}

fn lp_kernel(a: &Mat, objective: Vector) -> QpKernel {
    let d = a.ncols();
    QpKernel::new(Mat::zeros(d, d), objective, a.clone())
}

/// `max c' x` over `-1 <= Y x <= 1`; `None` if unbounded or failed.
pub fn max_over_unit_ball(y: &Mat, c: &Vector) -> Option<f64> {
    let a = crate::linalg::vstack(&[y, &(-y)]);
    let b = Vector::from_element(a.nrows(), 1.0);
    let out = lp_kernel(&a, -c).solve(&b, None, &QpSettings::default());
    (out.status == QpStatus::Optimal).then(|| c.dot(&out.x))
}

/// `max ||Y A x||_inf` over `||Y x||_inf <= 1`.
fn contraction(y: &Mat, a: &Mat) -> Option<f64> {
    let ya = y * a;
    let mut worst: f64 = 0.0;
    for i in 0..ya.nrows() {
        let row = ya.row(i).transpose();
        worst = worst.max(max_over_unit_ball(y, &row)?);
    }
    Some(worst)
}

/// `min ||Y x||_inf` over `||x||_inf = 1`.
fn min_gain(y: &Mat) -> Option<f64> {
    let (c, n) = y.shape();
    let mut best = f64::INFINITY;
    for j in 0..n {
        // Variables (x, t): -t <= Y x <= t, -1 <= x <= 1, x_j = 1.
        let mut a = Mat::zeros(2 * c + 2 * n + 2, n + 1);
        let mut b = Vector::zeros(a.nrows());
        for i in 0..c {
            for k in 0..n {
                a[(i, k)] = y[(i, k)];
                a[(c + i, k)] = -y[(i, k)];
            }
            a[(i, n)] = -1.0;
            a[(c + i, n)] = -1.0;
        }
        for k in 0..n {
            a[(2 * c + k, k)] = 1.0;
            a[(2 * c + n + k, k)] = -1.0;
            b[2 * c + k] = 1.0;
            b[2 * c + n + k] = 1.0;
        }
        a[(2 * c + 2 * n, j)] = 1.0;
        b[2 * c + 2 * n] = 1.0;
        a[(2 * c + 2 * n + 1, j)] = -1.0;
        b[2 * c + 2 * n + 1] = -1.0;
        let mut f = Vector::zeros(n + 1);
        f[n] = 1.0;
        let out = lp_kernel(&a, f).solve(&b, None, &QpSettings::default());
        if out.status != QpStatus::Optimal {
            return None;
        }
        best = best.min(out.x[n]);
    }
    Some(best)
}

/// Drops rows that do not shape the unit ball `{x : ||Y x||_inf <= 1}`.
fn reduce_rows(y: &Mat) -> Mat {
    let mut keep: Vec<usize> = (0..y.nrows())
        .filter(|&i| y.row(i).amax() > 1e-12)
        .collect();
    // Near-duplicates and sign-flipped duplicates first.
    let mut unique: Vec<usize> = Vec::new();
    for &i in &keep {
        let dup = unique.iter().any(|&j| {
            let (ri, rj) = (y.row(i), y.row(j));
            (ri - rj).amax() <= 1e-12 || (ri + rj).amax() <= 1e-12
        });
        if !dup {
            unique.push(i);
        }
    }
    keep = unique;
    // Redundancy LP against the remaining rows, newest rows first.
    let mut k = keep.len();
    while k > 0 {
        k -= 1;
        if keep.len() <= y.ncols() {
            break;
        }
        let i = keep[k];
        let others: Vec<usize> = keep.iter().copied().filter(|&j| j != i).collect();
        let rest = y.select_rows(others.iter());
        if numerical_rank(&rest, RANK_TOL) < y.ncols() {
            continue;
        }
        let row = y.row(i).transpose();
        if let Some(v) = max_over_unit_ball(&rest, &row) {
            if v <= 1.0 + 1e-9 {
                keep.remove(k);
            }
        }
    }
    y.select_rows(keep.iter())
}

/// Builds `Y` for `x+ = A x` by row augmentation `Y <- reduce([Y; Y A / theta])`
/// and rescales it so the certificate is admissible for `gamma` and the
/// zero input satisfies the decrease constraint of the linear part.
pub fn synthesize_y(
    a: &Mat,
    gamma: f64,
    opts: &SynthOpts,
) -> Result<(LyapunovCertificate, SynthesisReport), SynthesisError> {
    let n = a.nrows();
    if !a.is_square() || n == 0 {
        return Err(SynthesisError::Input("A must be square and nonempty".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SynthesisError::Input(format!("gamma = {gamma} outside (0, 1)")));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(SynthesisError::NotStable(rho));
    }
    let theta_target = opts.theta_target.unwrap_or(1.0 - 0.99 * gamma);
    if !(theta_target > 0.0 && theta_target < 1.0) {
        return Err(SynthesisError::Input(format!(
            "theta target {theta_target} outside (0, 1)"
        )));
    }
    let mut y = opts.y0.clone().unwrap_or_else(|| Mat::identity(n, n));
    if y.ncols() != n || numerical_rank(&y, RANK_TOL) < n {
        return Err(SynthesisError::Input("initial Y must have full column rank".into()));
    }
    let mut frontier = y.clone();
    let mut last_reason = String::new();
    for iter in 0..=opts.max_iters {
        match certify(&y, a, gamma) {
            Ok((cert, mut report)) => {
                report.iterations = iter;
                return Ok((cert, report));
            }
            Err(reason) => last_reason = reason,
        }
        if iter == opts.max_iters || frontier.nrows() == 0 {
            break;
        }
        let candidates = &frontier * a / theta_target;
        let before = y.nrows();
        let mut kept = Vec::new();
        for i in 0..candidates.nrows() {
            let row = candidates.row(i).transpose();
            match max_over_unit_ball(&y, &row) {
                Some(v) if v <= 1.0 + 1e-9 => {}
                _ => kept.push(i),
            }
        }
        let added = candidates.select_rows(kept.iter());
        y = reduce_rows(&crate::linalg::vstack(&[&y, &added]));
        frontier = added;
        log::debug!(
            "synthesis round {iter}: {before} -> {} rows, {} new",
            y.nrows(),
            frontier.nrows()
        );
    }
    Err(SynthesisError::Failed {
        iters: opts.max_iters,
        rows: y.nrows(),
        reason: last_reason,
    })
}

/// `(first row, dimension, |eigenvalue|)` per mode.
pub type Modes = Vec<(usize, usize, f64)>;

/// Real modal coordinates of `A`: rows of `T = P^-1` grouped per eigenvalue
/// (one row for a real eigenvalue, two for a conjugate pair, in which `A`
/// acts as a scaled rotation), with the eigenvalue moduli.
pub fn modal_coordinates(a: &Mat) -> Result<(Mat, Modes), SynthesisError> {
    use nalgebra::{Complex, DMatrix};
    let n = a.nrows();
    if !a.is_square() || n == 0 {
        return Err(SynthesisError::Input("A must be square and nonempty".into()));
    }
    let scale = mat_inf_norm(a).max(1.0);
    let eig = a.clone().complex_eigenvalues();
    let mut cols: Vec<Vector> = Vec::new();
    let mut modes = Vec::new();
    for lambda in eig.iter() {
        if lambda.im < -1e-12 * scale {
            continue;
        }
        let m = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { *lambda } else { Complex::new(0.0, 0.0) };
            Complex::new(a[(i, j)], 0.0) - d
        });
        let svd = m.svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let k = svd.singular_values.imin();
        let w: Vec<Complex<f64>> = v_t.row(k).iter().map(|c| c.conj()).collect();
        let start = cols.len();
        if lambda.im.abs() <= 1e-12 * scale {
            cols.push(Vector::from_iterator(n, w.iter().map(|c| c.re)));
            modes.push((start, 1, lambda.re.abs()));
        } else {
            cols.push(Vector::from_iterator(n, w.iter().map(|c| c.re)));
            cols.push(Vector::from_iterator(n, w.iter().map(|c| c.im)));
            modes.push((start, 2, lambda.norm()));
        }
    }
    if cols.len() != n {
        return Err(SynthesisError::Input("eigenvalue bookkeeping failed".into()));
    }
    let p = Mat::from_columns(&cols);
    if numerical_rank(&p, 1e-8) < n {
        return Err(SynthesisError::Input("A is not diagonalizable".into()));
    }
    let t = p.try_inverse().ok_or_else(|| SynthesisError::Input("singular modal basis".into()))?;
    Ok((t, modes))
}

/// `Y` whose unit ball is, per mode of `A`, a polygon with `2 facets` edges
/// circumscribing the modal disk. `||Y A x|| <= (r / cos(pi / (2 facets))) ||Y x||`
/// with `r` the spectral radius, so `facets` must make that ratio below one.
pub fn modal_y(a: &Mat, facets: usize) -> Result<Mat, SynthesisError> {
    if facets == 0 {
        return Err(SynthesisError::Input("facets must be positive".into()));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(SynthesisError::NotStable(rho));
    }
    let (t, modes) = modal_coordinates(a)?;
    let n = a.nrows();
    let mut rows = Vec::new();
    for (start, dim, _) in modes {
        if dim == 1 {
            rows.push(t.row(start).into_owned());
            continue;
        }
        for j in 0..facets {
            let (s, c) = (std::f64::consts::PI * j as f64 / facets as f64).sin_cos();
            rows.push(t.row(start) * c + t.row(start + 1) * s);
        }
    }
    let y = Mat::from_rows(&rows);
    debug_assert_eq!(y.ncols(), n);
    let norm = mat_inf_norm(&y);
    Ok(y / norm)
}

/// Facets needed by [`modal_y`] for contraction factor `target > rho`.
pub fn modal_facets(rho: f64, target: f64) -> Option<usize> {
    if !(rho < target && target < 1.0) {
        return None;
    }
    let half = (rho / target).acos();
    Some(((std::f64::consts::PI / (2.0 * half)).ceil() as usize).max(2))
}

/// Builds a certificate from `y` as [`synthesize_y`] does from its rows,
/// with the contraction measured by linear programs.
pub fn certify_rows(
    y: &Mat,
    a: &Mat,
    gamma: f64,
) -> Result<(LyapunovCertificate, SynthesisReport), SynthesisError> {
    certify(y, a, gamma).map_err(|reason| SynthesisError::Failed {
        iters: 0,
        rows: y.nrows(),
        reason,
    })
}

/// Largest `gamma` for which `y` (scaled to `||Y||_inf = 1`) certifies the
/// zero-input decrease for `A`.
pub fn decrease_margin(y: &Mat, a: &Mat) -> Option<f64> {
    let y = y / mat_inf_norm(y);
    let lambda = contraction(&y, a)?;
    let s = min_gain(&y)?;
    (lambda < 1.0).then_some((1.0 - lambda) * s)
}

/// Scales `y` into an admissible certificate whose zero-input decrease holds
/// for the linear dynamics `A`, if possible.
fn certify(
    y: &Mat,
    a: &Mat,
    gamma: f64,
) -> Result<(LyapunovCertificate, SynthesisReport), String> {
    let lambda = contraction(y, a).ok_or("contraction LP failed")?;
    if lambda >= 1.0 {
        return Err(format!("unit ball not contractive (factor {lambda:.6})"));
    }
    let s = min_gain(y).ok_or("gain LP failed")?;
    let norm = mat_inf_norm(y);
    // Need gamma <= scale (1 - lambda) s and gamma <= scale ||Y|| <= 1 + gamma.
    let needed = (gamma / ((1.0 - lambda) * s)).max(gamma / norm);
    let preferred = 1.0 / norm;
    let scale = if preferred >= needed { preferred } else { needed };
    if scale * norm > 1.0 + gamma {
        return Err(format!(
            "decrease needs ||Y||_inf = {:.6} > 1 + gamma (contraction {lambda:.6}, min gain ratio {:.6})",
            scale * norm,
            s / norm
        ));
    }
    let scaled = y * scale;
    let cert = check_certificate(&scaled, gamma).map_err(|e| e.to_string())?;
    let report = SynthesisReport {
        contraction: lambda,
        min_gain: s * scale,
        one_step_gain: mat_inf_norm(&(&scaled * a)),
        iterations: 0,
        rows: scaled.nrows(),
        scale,
    };
    Ok((cert, report))
}

/// Verifies the synthesis post-condition independently of how `Y` was built.
pub fn verify_contraction(cert: &LyapunovCertificate, a: &Mat) -> bool {
    match (contraction(&cert.y, a), min_gain(&cert.y)) {
        (Some(lambda), Some(s)) => lambda < 1.0 && cert.gamma <= (1.0 - lambda) * s * (1.0 + 1e-12),
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecreaseReport {
    /// Per step `t`: `V(x(t+1)) <= V(x(t)) - gamma ||x(t)||_inf + tol`.
    pub steps: Vec<bool>,
    /// Per step `t`: `V(x(t)) <= theta^t V(x(0)) + tol`, only for `Y = I`.
    pub geometric: Option<Vec<bool>>,
    /// Largest violation of the per-step decrease (negative when all hold).
    pub worst_margin: f64,
}

impl DecreaseReport {
    pub fn all_pass(&self) -> bool {
        self.steps.iter().all(|&b| b) && self.geometric.as_ref().is_none_or(|g| g.iter().all(|&b| b))
    }

    pub fn pass_rate(&self) -> f64 {
        if self.steps.is_empty() {
            1.0
        } else {
            self.steps.iter().filter(|&&b| b).count() as f64 / self.steps.len() as f64
        }
    }
}

pub fn check_decrease_trajectory(
    states: &[Vector],
    cert: &LyapunovCertificate,
    tol: f64,
) -> DecreaseReport {
    let v: Vec<f64> = states.iter().map(|x| cert.v(x)).collect();
    let mut worst = f64::NEG_INFINITY;
    let steps = states
        .windows(2)
        .enumerate()
        .map(|(t, w)| {
            let margin = v[t + 1] - (v[t] - cert.gamma * vec_inf_norm(w[0].as_slice()));
            worst = worst.max(margin);
            margin <= tol
        })
        .collect();
    let geometric = cert.is_identity().then(|| {
        v.iter()
            .enumerate()
            .map(|(t, &vt)| vt <= cert.theta.powi(t as i32) * v[0] + tol)
            .collect()
    });
    DecreaseReport {
        steps,
        geometric,
        worst_margin: worst,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub alpha: f64,
    pub beta: f64,
    pub t0: usize,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("no exponential envelope with beta < 1 (needs beta >= {0})")]
    NoEnvelope(f64),
    #[error("state at t0 = {0} is zero or missing")]
    ZeroStart(usize),
}

/// Smallest `beta` on a 1e-3 grid such that
/// `||x(t)|| <= alpha beta^(t - t0) ||x(t0)||` for all logged `t` with
/// `alpha <= alpha_max`. `beta` is never below the end-to-end decay rate, so
/// the overshoot allowance cannot stand in for decay.
pub fn fit_envelope(
    states: &[Vector],
    t0: usize,
    alpha_max: f64,
) -> Result<EnvelopeFit, EnvelopeError> {
    let norms: Vec<f64> = states
        .iter()
        .skip(t0)
        .map(|x| vec_inf_norm(x.as_slice()))
        .collect();
    let n0 = *norms.first().ok_or(EnvelopeError::ZeroStart(t0))?;
    if n0 == 0.0 {
        return Err(EnvelopeError::ZeroStart(t0));
    }
    let last = norms.len() - 1;
    let rate = if last == 0 {
        0.0
    } else {
        (norms[last] / n0).powf(1.0 / last as f64)
    };
    let alpha_for = |beta: f64| -> f64 {
        norms
            .iter()
            .enumerate()
            .map(|(k, &nk)| {
                if nk == 0.0 {
                    0.0
                } else {
                    nk / (beta.powi(k as i32) * n0)
                }
            })
            .fold(0.0, f64::max)
    };
    let start = ((rate * 1000.0) - 1e-9).ceil().max(0.0) as u32;
    for k in start..1000 {
        let beta = f64::from(k) / 1000.0;
        let alpha = alpha_for(beta);
        if alpha <= alpha_max {
            return Ok(EnvelopeFit { alpha, beta, t0 });
        }
    }
    Err(EnvelopeError::NoEnvelope(rate.max(1.0)))
}

#[cfg(test)]
mod tests {
    #[test]
    fn modal_polygon_certifies_slow_rotation() {
        let (s, c) = 0.2_f64.sin_cos();
        let r = 0.995;
        let a = Mat::from_row_slice(3, 3, &[r * c, -r * s, 0.0, r * s, r * c, 0.0, 0.0, 0.0, 0.5]);
        let facets = modal_facets(r, 0.998).unwrap();
        let y = modal_y(&a, facets).unwrap();
        assert_eq!(y.nrows(), facets + 1);
        let margin = decrease_margin(&y, &a).unwrap();
        assert!(margin > 0.0);
        let (cert, report) = certify_rows(&y, &a, 0.5 * margin).unwrap();
        assert!(report.contraction <= 0.998 + 1e-9);
        assert!(verify_contraction(&cert, &a));
        assert!(modal_y(&Mat::identity(2, 2), 8).is_err());
    }

    use super::*;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_row_slice(&[a, b])
    }

    #[test]
    fn v_eval_examples() {
        let i2 = Mat::identity(2, 2);
        assert_eq!(v_eval(&i2, &v2(1.0, -2.0)), 2.0);
        let y = Mat::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 3.0]);
        assert_eq!(v_eval(&y, &v2(1.0, 1.0)), 3.0);
        assert_eq!(v_eval(&y, &v2(0.0, 0.0)), 0.0);
    }

    #[test]
    fn certificate_examples() {
        let cert = check_certificate(&Mat::identity(2, 2), 0.5).unwrap();
        assert!((cert.theta() - 0.5).abs() < 1e-15);
        let y3 = Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let err = check_certificate(&y3, 0.5).unwrap_err();
        assert!(matches!(
            err.violations[..],
            [Violation::NormAboveOnePlusGamma { .. }]
        ));
        let cert = check_certificate(&y3, 2.5).unwrap();
        assert!((cert.theta() - 0.5).abs() < 1e-15);
        let singular = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            check_certificate(&singular, 1.5).unwrap_err().violations[..],
            [Violation::RankDeficient { rank: 1, n: 2 }]
        ));
    }

    fn linear(a: Mat, b: Mat) -> MldModel {
        let n = a.nrows();
        let m = b.ncols();
        MldModel::linear(a, b, Mat::identity(n, n), Mat::zeros(n, m))
    }

    #[test]
    fn decrease_rows_example() {
        let cert = check_certificate(&Mat::identity(2, 2), 0.5).unwrap();
        let model = linear(Mat::zeros(2, 2), Mat::identity(2, 2));
        let rows = decrease_rows(&cert, &model, &v2(1.0, -2.0));
        assert_eq!(rows.bound, 1.0);
        assert_eq!(rows.matrix.nrows(), 4);
        // x+ = u, so rows read |u_i| <= 1.
        assert_eq!(rows.rhs.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
        let zero = decrease_rows(&cert, &model, &v2(0.0, 0.0));
        assert_eq!(zero.bound, 0.0);
        assert!(!zero.rhs_negative);
    }

    #[test]
    fn scalar_contraction_keeps_identity() {
        let a = Mat::identity(2, 2) * 0.5;
        let (cert, report) = synthesize_y(&a, 0.4, &SynthOpts::default()).unwrap();
        assert_eq!(cert.y(), &Mat::identity(2, 2));
        assert_eq!(report.iterations, 0);
        assert!(verify_contraction(&cert, &a));
    }

    #[test]
    fn nilpotent_example_is_certified() {
        let a = Mat::from_row_slice(2, 2, &[0.0, 0.9, 0.0, 0.0]);
        let (cert, _) = synthesize_y(&a, 0.05, &SynthOpts::default()).unwrap();
        assert!(verify_contraction(&cert, &a));
        assert!(check_certificate(cert.y(), 0.05).is_ok());
    }

    #[test]
    fn augmentation_adds_rows_for_rotation() {
        // A contracting rotation is not contractive in the plain infinity norm.
        let (s, c) = 0.7_f64.sin_cos();
        let a = Mat::from_row_slice(2, 2, &[c, -s, s, c]) * 0.95;
        assert!(mat_inf_norm(&a) > 1.0);
        let (cert, report) = synthesize_y(
            &a,
            0.01,
            &SynthOpts {
                theta_target: Some(0.97),
                ..SynthOpts::default()
            },
        )
        .unwrap();
        assert!(cert.row_count() > 2);
        assert!(report.iterations > 0);
        assert!(verify_contraction(&cert, &a));
    }

    #[test]
    fn unstable_matrix_fails() {
        let a = Mat::identity(2, 2) * 1.1;
        assert!(matches!(
            synthesize_y(&a, 0.1, &SynthOpts::default()),
            Err(SynthesisError::NotStable(_))
        ));
    }

    #[test]
    fn trajectory_checks() {
        let cert = check_certificate(&Mat::identity(1, 1), 0.4).unwrap();
        let halving: Vec<Vector> = (0..20).map(|t| Vector::from_element(1, 0.5_f64.powi(t))).collect();
        let report = check_decrease_trajectory(&halving, &cert, TRAJECTORY_TOL);
        assert!(report.all_pass());
        let zeros = vec![Vector::zeros(1); 5];
        assert!(check_decrease_trajectory(&zeros, &cert, TRAJECTORY_TOL).all_pass());
        let flat = vec![Vector::from_element(1, 1.0); 5];
        assert!(!check_decrease_trajectory(&flat, &cert, TRAJECTORY_TOL).all_pass());
    }

    #[test]
    fn envelope_examples() {
        let halving: Vec<Vector> = (0..30).map(|t| Vector::from_element(1, 0.5_f64.powi(t))).collect();
        let fit = fit_envelope(&halving, 0, ALPHA_MAX).unwrap();
        assert!(fit.beta <= 0.5 + 1e-3);
        assert!((fit.alpha - 1.0).abs() < 1e-9);
        let flat = vec![Vector::from_element(1, 1.0); 30];
        assert!(matches!(fit_envelope(&flat, 0, ALPHA_MAX), Err(EnvelopeError::NoEnvelope(_))));
        assert!(matches!(
            fit_envelope(&[Vector::zeros(1)], 0, ALPHA_MAX),
            Err(EnvelopeError::ZeroStart(0))
        ));
    }
}
