use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use log::warn;

use super::{
    Branching, MiqpError, MiqpProblem, NodeSelection, NodeTrace, QpKernel, QpStatus, Solution,
    SolveMode, SolveStats, SolveStatus, SolverOpts, WarmStart,
};
use crate::linalg::{vstack, Mat, Vector};

/// Maps the problem onto one fixed constraint matrix: the `Phi` rows followed
/// by upper/lower bound rows. Binaries always own both bound rows so fixing a
/// binary only edits the right-hand side.
pub(crate) struct RowLayout {
    /// `(variable, row of x_i <= hi, row of -x_i <= -lo)`
    bound_rows: Vec<(usize, Option<usize>, Option<usize>)>,
    /// Position of each binary (by order in `problem.binary`) in `bound_rows`.
    binary_slot: Vec<usize>,
    total_rows: usize,
}

impl RowLayout {
    pub(crate) fn new(problem: &MiqpProblem) -> Self {
        let mut r = problem.phi_matrix.nrows();
        let mut bound_rows = Vec::new();
        let mut binary_slot = Vec::with_capacity(problem.binary.len());
        for (i, &(lo, hi)) in problem.bounds.iter().enumerate() {
            let is_binary = problem.binary.binary_search(&i).is_ok();
            let upper = (is_binary || hi.is_finite()).then(|| {
                r += 1;
                r - 1
            });
            let lower = (is_binary || lo.is_finite()).then(|| {
                r += 1;
                r - 1
            });
            if is_binary {
                binary_slot.push(bound_rows.len());
            }
            if upper.is_some() || lower.is_some() {
                bound_rows.push((i, upper, lower));
            }
        }
        Self {
            bound_rows,
            binary_slot,
            total_rows: r,
        }
    }

    pub(crate) fn kernel(&self, problem: &MiqpProblem) -> QpKernel {
        let d = problem.dim();
        let mut extra = Mat::zeros(self.total_rows - problem.phi_matrix.nrows(), d);
        let base = problem.phi_matrix.nrows();
        for &(i, upper, lower) in &self.bound_rows {
            if let Some(r) = upper {
                extra[(r - base, i)] = 1.0;
            }
            if let Some(r) = lower {
                extra[(r - base, i)] = -1.0;
            }
        }
        let a = vstack(&[&problem.phi_matrix, &extra]);
        QpKernel::new(problem.h.clone(), problem.f.clone(), a)
    }

    /// Right-hand side with binaries fixed per `fixing` (indexed like
    /// `problem.binary`) and free binaries relaxed to `[0, 1]`.
    pub(crate) fn rhs(&self, problem: &MiqpProblem, fixing: &[Option<u8>]) -> Vector {
        let mut b = Vector::zeros(self.total_rows);
        b.rows_mut(0, problem.phi_rhs.len()).copy_from(&problem.phi_rhs);
        for &(i, upper, lower) in &self.bound_rows {
            let (lo, hi) = problem.bounds[i];
            if let Some(r) = upper {
                b[r] = hi;
            }
            if let Some(r) = lower {
                b[r] = -lo;
            }
        }
        for (k, fix) in fixing.iter().enumerate() {
            let (i, upper, lower) = self.bound_rows[self.binary_slot[k]];
            let (lo, hi) = match fix {
                Some(v) => (f64::from(*v), f64::from(*v)),
                None => (problem.bounds[i].0.max(0.0), problem.bounds[i].1.min(1.0)),
            };
            b[upper.expect("binary upper row")] = hi;
            b[lower.expect("binary lower row")] = -lo;
        }
        b
    }
}

struct Node {
    id: usize,
    fixing: Vec<Option<u8>>,
    /// Lower bound inherited from the parent relaxation.
    bound: f64,
    warm: Option<WarmStart>,
    seq: usize,
}

/// Min-heap entry ordered by bound, then by insertion order.
struct Ranked(Node);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then(other.0.seq.cmp(&self.0.seq))
    }
}

enum Frontier {
    Heap(BinaryHeap<Ranked>),
    Stack(Vec<Node>),
}

impl Frontier {
    fn push(&mut self, node: Node) {
        match self {
            Self::Heap(h) => h.push(Ranked(node)),
            Self::Stack(s) => s.push(node),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Self::Heap(h) => h.pop().map(|r| r.0),
            Self::Stack(s) => s.pop(),
        }
    }

}

/// Branch-and-bound over convex relaxations.
pub fn solve(problem: &MiqpProblem, opts: &SolverOpts) -> Result<Solution, MiqpError> {
    problem.validate()?;
    let start = Instant::now();
    let layout = RowLayout::new(problem);
    let kernel = layout.kernel(problem);
    let settings = opts.qp_settings();
    let nb = problem.binary.len();

    let mut stats = SolveStats::default();
    let mut trace = Vec::new();
    let mut incumbent: Option<(f64, Vector)> = None;
    let mut frontier = match opts.selection() {
        NodeSelection::BestBound => Frontier::Heap(BinaryHeap::new()),
        NodeSelection::DepthFirst => Frontier::Stack(Vec::new()),
    };
    let mut seq = 0;
    frontier.push(Node {
        id: 0,
        fixing: vec![None; nb],
        bound: f64::NEG_INFINITY,
        warm: None,
        seq,
    });
    let mut parents: Vec<Option<usize>> = vec![None];
    let mut hit_limit = false;

    while let Some(node) = frontier.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - opts.gap {
                continue;
            }
        }
        if stats.nodes >= opts.node_limit {
            hit_limit = true;
            break;
        }
        stats.nodes += 1;
        stats.qp_solves += 1;
        let b = layout.rhs(problem, &node.fixing);
        let out = kernel.solve(&b, node.warm.as_ref(), &settings);
        let relaxed = match out.status {
            QpStatus::Optimal => Some(out.objective + problem.constant),
            QpStatus::Infeasible => None,
            QpStatus::Unbounded | QpStatus::NumericalFailure => {
                stats.numerical_failures += 1;
                warn!(
                    "node {} relaxation ended with {:?}; pruning it",
                    node.id, out.status
                );
                None
            }
        };
        if opts.trace {
            trace.push(NodeTrace {
                id: node.id,
                parent: parents[node.id],
                bound: relaxed,
            });
        }
        let Some(bound) = relaxed else { continue };
        if let Some((best, _)) = &incumbent {
            if bound >= best - opts.gap {
                continue;
            }
        }

        let mut branch = pick_branch(problem, &out.x, &node.fixing, opts);
        if branch.is_none() {
            match polish(problem, &layout, &kernel, &out, &mut stats, opts) {
                Some((j, u)) => {
                    if incumbent.as_ref().is_none_or(|(best, _)| j < *best) {
                        incumbent = Some((j, u));
                    }
                    if opts.mode == SolveMode::FirstFeasible {
                        break;
                    }
                    continue;
                }
                // Binaries within tolerance of integral whose rounding is
                // infeasible still need to be branched on.
                None => branch = nearest_fractional(problem, &out.x, &node.fixing),
            }
        }
        match branch {
            None => {}
            Some(k) => {
                let i = problem.binary[k];
                let up_first = out.x[i] >= 0.5;
                let warm = WarmStart {
                    x: out.x.clone(),
                    working_set: out.working_set.clone(),
                };
                // Depth-first pops the last push, so the rounding-direction
                // child goes in second.
                let order: [u8; 2] = match (&frontier, up_first) {
                    (Frontier::Stack(_), true) | (Frontier::Heap(_), false) => [0, 1],
                    _ => [1, 0],
                };
                for v in order {
                    let mut fixing = node.fixing.clone();
                    fixing[k] = Some(v);
                    seq += 1;
                    let id = parents.len();
                    parents.push(Some(node.id));
                    frontier.push(Node {
                        id,
                        fixing,
                        bound,
                        warm: Some(warm.clone()),
                        seq,
                    });
                }
            }
        }
    }
    stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let status = match (&incumbent, hit_limit, opts.mode) {
        (_, true, _) => SolveStatus::NodeLimit,
        (None, false, _) => SolveStatus::Infeasible,
        (Some(_), false, SolveMode::Optimal) => SolveStatus::Optimal,
        (Some(_), false, SolveMode::FirstFeasible) => SolveStatus::FirstFeasible,
    };
    let (objective, u) = incumbent.unwrap_or((f64::INFINITY, Vector::zeros(problem.dim())));
    Ok(Solution {
        status,
        u,
        objective,
        stats,
        trace,
    })
}

/// Index into `problem.binary` of the variable to branch on, or `None` when
/// the relaxation is integral.
fn pick_branch(
    problem: &MiqpProblem,
    x: &Vector,
    fixing: &[Option<u8>],
    opts: &SolverOpts,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &i) in problem.binary.iter().enumerate() {
        if fixing[k].is_some() {
            continue;
        }
        let frac = (x[i] - x[i].round()).abs();
        if frac <= opts.integrality_tol {
            continue;
        }
        match opts.branching {
            Branching::FirstIndex => return Some(k),
            Branching::MostFractional => {
                if best.is_none_or(|(_, f)| frac > f) {
                    best = Some((k, frac));
                }
            }
        }
    }
    best.map(|(k, _)| k)
}

fn nearest_fractional(problem: &MiqpProblem, x: &Vector, fixing: &[Option<u8>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &i) in problem.binary.iter().enumerate() {
        let frac = (x[i] - x[i].round()).abs();
        if fixing[k].is_none() && frac > 0.0 && best.is_none_or(|(_, f)| frac > f) {
            best = Some((k, frac));
        }
    }
    best.map(|(k, _)| k)
}

/// Rounds the binaries of an integral relaxation and re-solves the continuous
/// part with them fixed, so the returned point is exactly integral. `None`
/// when the rounded assignment is infeasible.
fn polish(
    problem: &MiqpProblem,
    layout: &RowLayout,
    kernel: &QpKernel,
    out: &super::QpOutput,
    stats: &mut SolveStats,
    opts: &SolverOpts,
) -> Option<(f64, Vector)> {
    let fixing: Vec<Option<u8>> = problem
        .binary
        .iter()
        .map(|&i| Some(out.x[i].round().clamp(0.0, 1.0) as u8))
        .collect();
    let b = layout.rhs(problem, &fixing);
    let warm = WarmStart {
        x: out.x.clone(),
        working_set: out.working_set.clone(),
    };
    stats.qp_solves += 1;
    let fixed = kernel.solve(&b, Some(&warm), &opts.qp_settings());
    if fixed.status != QpStatus::Optimal {
        return None;
    }
    let mut u = fixed.x;
    for &i in &problem.binary {
        u[i] = u[i].round();
    }
    Some((problem.objective(&u), u))
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy;
    use super::super::{brute_force, random};
    use super::*;

    #[test]
    fn toy_problem_picks_upper_binary() {
        let s = solve(&toy(), &SolverOpts::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 0.125).abs() < 1e-9);
        assert_eq!(s.u[1], 1.0);
        assert!((s.u[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_binaries_are_infeasible() {
        let p = MiqpProblem::new(
            Mat::zeros(2, 2),
            Vector::zeros(2),
            Mat::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, 1.0]),
            Vector::from_row_slice(&[-1.0, 0.0]),
            vec![0, 1],
        );
        for opts in [SolverOpts::default(), SolverOpts::first_feasible()] {
            assert_eq!(solve(&p, &opts).unwrap().status, SolveStatus::Infeasible);
        }
    }

    #[test]
    fn node_limit_is_reported() {
        // Three binaries summing to 1.5 is infeasible only after branching.
        let p = MiqpProblem::new(
            Mat::zeros(3, 3),
            Vector::zeros(3),
            Mat::from_row_slice(2, 3, &[1.0, 1.0, 1.0, -1.0, -1.0, -1.0]),
            Vector::from_row_slice(&[1.5, -1.5]),
            vec![0, 1, 2],
        );
        let opts = SolverOpts {
            node_limit: 2,
            ..SolverOpts::default()
        };
        assert_eq!(solve(&p, &opts).unwrap().status, SolveStatus::NodeLimit);
        assert_eq!(
            solve(&p, &SolverOpts::default()).unwrap().status,
            SolveStatus::Infeasible
        );
    }

    #[test]
    fn bounds_are_monotone_along_paths() {
        let opts = SolverOpts {
            trace: true,
            ..SolverOpts::default()
        };
        for p in random::instances(42, 30) {
            let s = solve(&p, &opts).unwrap();
            let mut bound_of = std::collections::HashMap::new();
            for t in &s.trace {
                bound_of.insert(t.id, t.bound);
            }
            for t in &s.trace {
                if let (Some(parent), Some(b)) = (t.parent, t.bound) {
                    let pb = bound_of[&parent].expect("parents of explored nodes were feasible");
                    assert!(b >= pb - 1e-7, "child {b} below parent {pb}");
                }
            }
        }
    }

    #[test]
    fn first_feasible_solutions_are_valid() {
        for p in random::instances(7, 40) {
            let s = solve(&p, &SolverOpts::first_feasible()).unwrap();
            let reference = brute_force(&p, &SolverOpts::default()).unwrap();
            if s.status == SolveStatus::FirstFeasible {
                assert!(p.constraint_residual(&s.u) <= 1e-7);
                assert!(p.integrality_residual(&s.u) <= 1e-6);
                assert_eq!(reference.status, SolveStatus::Optimal);
            } else {
                assert_eq!(s.status, SolveStatus::Infeasible);
                assert_eq!(reference.status, SolveStatus::Infeasible);
            }
        }
    }

    #[test]
    fn repeated_solves_are_identical() {
        for p in random::instances(3, 10) {
            let a = solve(&p, &SolverOpts::default()).unwrap();
            let b = solve(&p, &SolverOpts::default()).unwrap();
            assert_eq!(a.status, b.status);
            let ab: Vec<u64> = a.u.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.u.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }
}
