//! Big-M translation of logic and products into mixed-integer inequalities.
//!
//! Encoders emit rows `sum_v a_v v <= b` over named variables. [`assemble`]
//! sorts the coefficients into the MLD orientation
//! `E2 delta + E3 z <= E1 u + E4 x + E5`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::linalg::{Mat, Vector};

/// Default margin turning `e < 0` into `e <= -eps`.
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum LogicError {
    #[error("unknown variable `{0}`")]
    Unknown(String),
    #[error("variable `{name}` is {found}, expected {expected}")]
    WrongKind {
        name: String,
        expected: VarKind,
        found: VarKind,
    },
    #[error("variable `{0}` has no finite bounds in the box")]
    Unbounded(String),
    #[error("variable `{name}` declared both as {first} and {second}")]
    Conflict {
        name: String,
        first: VarKind,
        second: VarKind,
    },
    #[error("invalid bounds for `{name}`: [{lo}, {hi}]")]
    BadBounds { name: String, lo: f64, hi: f64 },
    #[error("eps must be positive, got {0}")]
    BadEps(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKind {
    Input,
    Binary,
    Aux,
    State,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Input => "an input",
            Self::Binary => "a binary auxiliary",
            Self::Aux => "a continuous auxiliary",
            Self::State => "a state",
        })
    }
}

/// Declared variables per kind, in declaration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarTable {
    order: Vec<(String, VarKind)>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, kind: VarKind) -> Result<(), LogicError> {
        match self.kind(name) {
            Some(k) if k == kind => Ok(()),
            Some(k) => Err(LogicError::Conflict {
                name: name.into(),
                first: k,
                second: kind,
            }),
            None => {
                self.order.push((name.into(), kind));
                Ok(())
            }
        }
    }

    pub fn input(&mut self, name: &str) -> &mut Self {
        self.declare(name, VarKind::Input).expect("fresh input name");
        self
    }

    pub fn binary(&mut self, name: &str) -> &mut Self {
        self.declare(name, VarKind::Binary).expect("fresh binary name");
        self
    }

    pub fn aux(&mut self, name: &str) -> &mut Self {
        self.declare(name, VarKind::Aux).expect("fresh auxiliary name");
        self
    }

    pub fn state(&mut self, name: &str) -> &mut Self {
        self.declare(name, VarKind::State).expect("fresh state name");
        self
    }

    pub fn kind(&self, name: &str) -> Option<VarKind> {
        self.order.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }

    pub fn names(&self, kind: VarKind) -> Vec<String> {
        self.order
            .iter()
            .filter(|(_, k)| *k == kind)
            .map(|(n, _)| n.clone())
            .collect()
    }

    fn expect(&self, name: &str, kind: VarKind) -> Result<(), LogicError> {
        match self.kind(name) {
            None => Err(LogicError::Unknown(name.into())),
            Some(k) if k != kind => Err(LogicError::WrongKind {
                name: name.into(),
                expected: kind,
                found: k,
            }),
            Some(_) => Ok(()),
        }
    }

    fn merge(&mut self, other: &VarTable) -> Result<(), LogicError> {
        for (name, kind) in &other.order {
            self.declare(name, *kind)?;
        }
        Ok(())
    }
}

/// `sum_v c_v v + constant`
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: BTreeMap<String, f64>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(name: &str) -> Self {
        Self::term(name, 1.0)
    }

    pub fn term(name: &str, coeff: f64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(name.to_string(), coeff);
        Self {
            terms,
            constant: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: BTreeMap::new(),
            constant: value,
        }
    }

    pub fn plus(mut self, name: &str, coeff: f64) -> Self {
        *self.terms.entry(name.to_string()).or_insert(0.0) += coeff;
        self
    }

    pub fn sum(mut self, other: &LinExpr) -> Self {
        for (n, c) in &other.terms {
            *self.terms.entry(n.clone()).or_insert(0.0) += c;
        }
        self.constant += other.constant;
        self
    }

    pub fn scale(mut self, k: f64) -> Self {
        for c in self.terms.values_mut() {
            *c *= k;
        }
        self.constant *= k;
        self
    }

    pub fn eval(&self, point: &BTreeMap<String, f64>) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(n, c)| c * point.get(n).copied().unwrap_or(f64::NAN))
                .sum::<f64>()
    }

    fn check(&self, vars: &VarTable) -> Result<(), LogicError> {
        match self.terms.keys().find(|n| vars.kind(n).is_none()) {
            Some(n) => Err(LogicError::Unknown(n.clone())),
            None => Ok(()),
        }
    }
}

/// Finite bounds per variable. Binaries default to `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarBox {
    bounds: BTreeMap<String, (f64, f64)>,
}

impl VarBox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, lo: f64, hi: f64) -> Result<Self, LogicError> {
        self.set(name, lo, hi)?;
        Ok(self)
    }

    pub fn set(&mut self, name: &str, lo: f64, hi: f64) -> Result<(), LogicError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(LogicError::BadBounds {
                name: name.into(),
                lo,
                hi,
            });
        }
        self.bounds.insert(name.into(), (lo, hi));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.bounds.get(name).copied()
    }

    /// Interval enclosure of `e` over the box.
    pub fn range(&self, e: &LinExpr, vars: &VarTable) -> Result<(f64, f64), LogicError> {
        let mut lo = e.constant;
        let mut hi = e.constant;
        for (name, &c) in &e.terms {
            let (a, b) = match self.get(name) {
                Some(b) => b,
                None if vars.kind(name) == Some(VarKind::Binary) => (0.0, 1.0),
                None => return Err(LogicError::Unbounded(name.clone())),
            };
            lo += (c * a).min(c * b);
            hi += (c * a).max(c * b);
        }
        Ok((lo, hi))
    }
}

/// `sum terms <= rhs`
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub terms: BTreeMap<String, f64>,
    pub rhs: f64,
}

impl Row {
    /// `e <= 0`
    fn from_expr(e: LinExpr) -> Self {
        let mut terms = e.terms;
        terms.retain(|_, c| *c != 0.0);
        Self {
            terms,
            rhs: -e.constant,
        }
    }

    pub fn slack(&self, point: &BTreeMap<String, f64>) -> f64 {
        let lhs: f64 = self
            .terms
            .iter()
            .map(|(n, c)| c * point.get(n).copied().unwrap_or(f64::NAN))
            .sum();
        self.rhs - lhs
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IneqSystem {
    pub rows: Vec<Row>,
    /// Declared variables plus any auxiliaries the encoder created.
    pub vars: VarTable,
    /// Auxiliaries created by the encoder, in creation order.
    pub created: Vec<(String, VarKind)>,
}

impl IneqSystem {
    fn new(vars: &VarTable) -> Self {
        Self {
            rows: Vec::new(),
            vars: vars.clone(),
            created: Vec::new(),
        }
    }

    fn push(&mut self, e: LinExpr) {
        self.rows.push(Row::from_expr(e));
    }

    fn create(&mut self, name: &str, kind: VarKind) -> Result<(), LogicError> {
        self.vars.declare(name, kind)?;
        self.created.push((name.into(), kind));
        Ok(())
    }

    fn extend(&mut self, other: IneqSystem) -> Result<(), LogicError> {
        self.vars.merge(&other.vars)?;
        self.rows.extend(other.rows);
        self.created.extend(other.created);
        Ok(())
    }

    /// Whether every row holds at `point` up to `tol`.
    pub fn satisfied(&self, point: &BTreeMap<String, f64>, tol: f64) -> bool {
        self.rows.iter().all(|r| r.slack(point) >= -tol)
    }
}

/// `e <= 0` as a plain linear row.
pub fn encode_le(vars: &VarTable, e: &LinExpr) -> Result<IneqSystem, LogicError> {
    e.check(vars)?;
    let mut sys = IneqSystem::new(vars);
    sys.push(e.clone());
    Ok(sys)
}

/// `d1 or d2`: `-d1 - d2 <= -1`.
pub fn encode_or(vars: &VarTable, d1: &str, d2: &str) -> Result<IneqSystem, LogicError> {
    vars.expect(d1, VarKind::Binary)?;
    vars.expect(d2, VarKind::Binary)?;
    let mut sys = IneqSystem::new(vars);
    sys.push(LinExpr::term(d1, -1.0).plus(d2, -1.0).sum(&LinExpr::constant(1.0)));
    Ok(sys)
}

/// `d1 = 1 -> d2 = 1`: `d1 - d2 <= 0`.
pub fn encode_implies(vars: &VarTable, d1: &str, d2: &str) -> Result<IneqSystem, LogicError> {
    vars.expect(d1, VarKind::Binary)?;
    vars.expect(d2, VarKind::Binary)?;
    let mut sys = IneqSystem::new(vars);
    sys.push(LinExpr::var(d1).plus(d2, -1.0));
    Ok(sys)
}

/// `d1 = d2` as two implications.
pub fn encode_iff_binary(vars: &VarTable, d1: &str, d2: &str) -> Result<IneqSystem, LogicError> {
    let mut sys = encode_implies(vars, d1, d2)?;
    sys.push(LinExpr::var(d2).plus(d1, -1.0));
    Ok(sys)
}

/// `d = 1 <-> e >= 0`, with `e < 0` read as `e <= -eps`.
pub fn encode_iff_threshold(
    vars: &VarTable,
    d: &str,
    e: &LinExpr,
    bx: &VarBox,
    eps: f64,
) -> Result<IneqSystem, LogicError> {
    if !(eps > 0.0) {
        return Err(LogicError::BadEps(eps));
    }
    vars.expect(d, VarKind::Binary)?;
    e.check(vars)?;
    let (e_lo, e_hi) = bx.range(e, vars)?;
    // Bounds of -e.
    let g = -e_lo;
    let l = -e_hi;
    let mut sys = IneqSystem::new(vars);
    // -e <= g (1 - d)
    sys.push(e.clone().scale(-1.0).plus(d, g).sum(&LinExpr::constant(-g)));
    // -e >= eps + (l - eps) d
    sys.push(e.clone().plus(d, l - eps).sum(&LinExpr::constant(eps)));
    Ok(sys)
}

/// `z = d * e` on the box.
pub fn encode_product(
    vars: &VarTable,
    z: &str,
    d: &str,
    e: &LinExpr,
    bx: &VarBox,
) -> Result<IneqSystem, LogicError> {
    vars.expect(z, VarKind::Aux)?;
    vars.expect(d, VarKind::Binary)?;
    e.check(vars)?;
    let (m, big_m) = bx.range(e, vars)?;
    let mut sys = IneqSystem::new(vars);
    // z <= M d
    sys.push(LinExpr::var(z).plus(d, -big_m));
    // z >= m d
    sys.push(LinExpr::term(z, -1.0).plus(d, m));
    // z <= e - m (1 - d)
    sys.push(
        LinExpr::var(z)
            .sum(&e.clone().scale(-1.0))
            .plus(d, -m)
            .sum(&LinExpr::constant(m)),
    );
    // z >= e - M (1 - d)
    sys.push(
        LinExpr::term(z, -1.0)
            .sum(e)
            .plus(d, big_m)
            .sum(&LinExpr::constant(-big_m)),
    );
    Ok(sys)
}

/// Names of the two product auxiliaries [`encode_piecewise`] creates for `f`.
pub fn piecewise_aux_names(f: &str) -> [String; 2] {
    [format!("{f}_p0"), format!("{f}_p1")]
}

/// `f = branch0` if `d = 0`, `f = branch1` if `d = 1`, via
/// `p0 = d * branch0`, `p1 = d * branch1` and `f = branch0 - p0 + p1`.
pub fn encode_piecewise(
    vars: &VarTable,
    f: &str,
    d: &str,
    branch0: &LinExpr,
    branch1: &LinExpr,
    bx: &VarBox,
) -> Result<IneqSystem, LogicError> {
    vars.expect(f, VarKind::Aux)?;
    vars.expect(d, VarKind::Binary)?;
    let [p0, p1] = piecewise_aux_names(f);
    let mut sys = IneqSystem::new(vars);
    sys.create(&p0, VarKind::Aux)?;
    sys.create(&p1, VarKind::Aux)?;
    let prod0 = encode_product(&sys.vars, &p0, d, branch0, bx)?;
    let prod1 = encode_product(&sys.vars, &p1, d, branch1, bx)?;
    sys.extend(prod0)?;
    sys.extend(prod1)?;
    let tie = LinExpr::var(f)
        .sum(&branch0.clone().scale(-1.0))
        .plus(&p0, 1.0)
        .plus(&p1, -1.0);
    sys.push(tie.clone());
    sys.push(tie.scale(-1.0));
    Ok(sys)
}

/// Stacked constraint matrices with the column names of each block.
#[derive(Clone, Debug, PartialEq)]
pub struct Assembled {
    pub e1: Mat,
    pub e2: Mat,
    pub e3: Mat,
    pub e4: Mat,
    pub e5: Vector,
    pub inputs: Vec<String>,
    pub binaries: Vec<String>,
    pub auxiliaries: Vec<String>,
    pub states: Vec<String>,
}

/// Stacks systems in order. `declared` fixes the column order; variables
/// that only appear in a system's table are appended in first-seen order.
pub fn assemble(systems: &[IneqSystem], declared: &VarTable) -> Result<Assembled, LogicError> {
    let mut table = declared.clone();
    for s in systems {
        table.merge(&s.vars)?;
    }
    let inputs = table.names(VarKind::Input);
    let binaries = table.names(VarKind::Binary);
    let auxiliaries = table.names(VarKind::Aux);
    let states = table.names(VarKind::State);
    let col = |names: &[String], n: &str| names.iter().position(|x| x == n);

    let q = systems.iter().map(|s| s.rows.len()).sum();
    let mut e1 = Mat::zeros(q, inputs.len());
    let mut e2 = Mat::zeros(q, binaries.len());
    let mut e3 = Mat::zeros(q, auxiliaries.len());
    let mut e4 = Mat::zeros(q, states.len());
    let mut e5 = Vector::zeros(q);
    let rows = systems.iter().flat_map(|s| s.rows.iter());
    for (r, row) in rows.enumerate() {
        e5[r] = row.rhs;
        for (name, &c) in &row.terms {
            match table.kind(name) {
                Some(VarKind::Input) => e1[(r, col(&inputs, name).unwrap())] -= c,
                Some(VarKind::Binary) => e2[(r, col(&binaries, name).unwrap())] += c,
                Some(VarKind::Aux) => e3[(r, col(&auxiliaries, name).unwrap())] += c,
                Some(VarKind::State) => e4[(r, col(&states, name).unwrap())] -= c,
                None => return Err(LogicError::Unknown(name.clone())),
            }
        }
    }
    Ok(Assembled {
        e1,
        e2,
        e3,
        e4,
        e5,
        inputs,
        binaries,
        auxiliaries,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    fn binaries() -> VarTable {
        let mut v = VarTable::new();
        v.binary("d1").binary("d2");
        v
    }

    /// Grid of `count` evenly spaced points on `[lo, hi]`.
    fn grid(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
        (0..count).map(move |i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
    }

    #[test]
    fn or_truth_table() {
        let sys = encode_or(&binaries(), "d1", "d2").unwrap();
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let ok = sys.satisfied(&point(&[("d1", a), ("d2", b)]), 0.0);
            assert_eq!(ok, a == 1.0 || b == 1.0, "({a}, {b})");
        }
    }

    #[test]
    fn implication_and_equivalence_truth_tables() {
        let imp = encode_implies(&binaries(), "d1", "d2").unwrap();
        let iff = encode_iff_binary(&binaries(), "d1", "d2").unwrap();
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let p = point(&[("d1", a), ("d2", b)]);
            assert_eq!(imp.satisfied(&p, 0.0), !(a == 1.0 && b == 0.0));
            assert_eq!(iff.satisfied(&p, 0.0), a == b);
        }
    }

    #[test]
    fn unregistered_variables_are_rejected() {
        assert_eq!(
            encode_or(&binaries(), "d1", "d9"),
            Err(LogicError::Unknown("d9".into()))
        );
        let mut v = binaries();
        v.state("x");
        assert!(matches!(
            encode_implies(&v, "x", "d1"),
            Err(LogicError::WrongKind { .. })
        ));
    }

    fn threshold_setup() -> (VarTable, VarBox) {
        let mut v = VarTable::new();
        v.state("x").binary("d");
        (v, VarBox::new().with("x", -10.0, 10.0).unwrap())
    }

    #[test]
    fn threshold_points() {
        let (v, bx) = threshold_setup();
        let sys = encode_iff_threshold(&v, "d", &LinExpr::var("x"), &bx, DEFAULT_EPS).unwrap();
        let ok = |x: f64, d: f64| sys.satisfied(&point(&[("x", x), ("d", d)]), 0.0);
        assert!(ok(5.0, 1.0) && !ok(5.0, 0.0));
        assert!(ok(-5.0, 0.0) && !ok(-5.0, 1.0));
        assert!(ok(0.0, 1.0) && !ok(0.0, 0.0));
    }

    #[test]
    fn threshold_grid_matches_statement() {
        let (v, bx) = threshold_setup();
        let e = LinExpr::var("x").sum(&LinExpr::constant(-2.5));
        let sys = encode_iff_threshold(&v, "d", &e, &bx, DEFAULT_EPS).unwrap();
        for x in grid(-10.0, 10.0, 21) {
            for d in [0.0, 1.0] {
                let ev = x - 2.5;
                let truth = if d == 1.0 { ev >= 0.0 } else { ev <= -DEFAULT_EPS };
                assert_eq!(sys.satisfied(&point(&[("x", x), ("d", d)]), 0.0), truth, "x={x} d={d}");
            }
        }
    }

    #[test]
    fn threshold_needs_bounded_expression() {
        let (v, _) = threshold_setup();
        assert_eq!(
            encode_iff_threshold(&v, "d", &LinExpr::var("x"), &VarBox::new(), 1e-6),
            Err(LogicError::Unbounded("x".into()))
        );
        assert_eq!(
            encode_iff_threshold(&v, "d", &LinExpr::var("x"), &VarBox::new(), 0.0),
            Err(LogicError::BadEps(0.0))
        );
    }

    fn product_setup() -> (VarTable, VarBox, IneqSystem) {
        let mut v = VarTable::new();
        v.state("x").binary("d").aux("z");
        let bx = VarBox::new().with("x", -10.0, 10.0).unwrap();
        let sys = encode_product(&v, "z", "d", &LinExpr::var("x"), &bx).unwrap();
        (v, bx, sys)
    }

    #[test]
    fn product_points() {
        let (_, _, sys) = product_setup();
        let ok = |x: f64, d: f64, z: f64| sys.satisfied(&point(&[("x", x), ("d", d), ("z", z)]), 0.0);
        assert!(ok(3.0, 1.0, 3.0));
        assert!(!ok(3.0, 1.0, 3.01) && !ok(3.0, 1.0, 2.99));
        assert!(ok(7.0, 0.0, 0.0) && !ok(7.0, 0.0, 0.1));
        assert!(ok(-10.0, 1.0, -10.0) && !ok(-10.0, 1.0, -10.1));
    }

    #[test]
    fn product_grid_matches_statement() {
        let (_, _, sys) = product_setup();
        for x in grid(-10.0, 10.0, 21) {
            for d in [0.0, 1.0] {
                for z in grid(-10.0, 10.0, 21) {
                    let feasible = sys.satisfied(&point(&[("x", x), ("d", d), ("z", z)]), 0.0);
                    assert_eq!(feasible, z == d * x, "x={x} d={d} z={z}");
                    if feasible {
                        assert!((z - d * x).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn piecewise_selects_branch() {
        let mut v = VarTable::new();
        v.state("x").input("u").binary("d").aux("f");
        let bx = VarBox::new()
            .with("x", -2.0, 2.0)
            .unwrap()
            .with("u", -1.0, 1.0)
            .unwrap();
        let b0 = LinExpr::var("u").plus("x", -3.0);
        let b1 = LinExpr::term("u", -1.0).plus("x", 3.0);
        let sys = encode_piecewise(&v, "f", "d", &b0, &b1, &bx).unwrap();
        assert_eq!(sys.rows.len(), 10);
        let [p0, p1] = piecewise_aux_names("f");
        for x in grid(-2.0, 2.0, 21) {
            for u in grid(-1.0, 1.0, 21) {
                for d in [0.0, 1.0] {
                    let mut pt = point(&[("x", x), ("u", u), ("d", d)]);
                    let f = if d == 0.0 { b0.eval(&pt) } else { b1.eval(&pt) };
                    pt.insert(p0.clone(), d * b0.eval(&pt));
                    pt.insert(p1.clone(), d * b1.eval(&pt));
                    pt.insert("f".into(), f);
                    assert!(sys.satisfied(&pt, 1e-12));
                    pt.insert("f".into(), f + 1e-3);
                    assert!(!sys.satisfied(&pt, 1e-12));
                }
            }
        }
    }

    #[test]
    fn assemble_or_row() {
        let sys = encode_or(&binaries(), "d1", "d2").unwrap();
        let a = assemble(&[sys], &binaries()).unwrap();
        assert_eq!(a.e2, Mat::from_row_slice(1, 2, &[-1.0, -1.0]));
        assert_eq!(a.e5.as_slice(), &[-1.0]);
        assert_eq!(a.e1.shape(), (1, 0));
        assert_eq!(a.e3.shape(), (1, 0));
        assert_eq!(a.e4.shape(), (1, 0));
    }

    #[test]
    fn assemble_empty() {
        let a = assemble(&[], &VarTable::new()).unwrap();
        assert_eq!(a.e2.shape(), (0, 0));
        assert_eq!(a.e5.len(), 0);
    }

    #[test]
    fn assemble_orientation_and_conflicts() {
        let mut v = VarTable::new();
        v.input("u").binary("d").aux("z").state("x");
        // z + d - u - x <= 4  ->  E1 = 1, E2 = 1, E3 = 1, E4 = 1, E5 = 4
        let row = LinExpr::var("z")
            .plus("d", 1.0)
            .plus("u", -1.0)
            .plus("x", -1.0)
            .sum(&LinExpr::constant(-4.0));
        let a = assemble(&[encode_le(&v, &row).unwrap()], &v).unwrap();
        assert_eq!((a.e1[(0, 0)], a.e2[(0, 0)], a.e3[(0, 0)], a.e4[(0, 0)]), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(a.e5[0], 4.0);

        let mut other = VarTable::new();
        other.state("u");
        assert!(matches!(
            assemble(&[encode_le(&other, &LinExpr::var("u")).unwrap()], &v),
            Err(LogicError::Conflict { .. })
        ));
    }
}
