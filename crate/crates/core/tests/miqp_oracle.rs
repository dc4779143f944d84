use hmpc_core::linalg::{Mat, Vector};
use hmpc_core::miqp::{self, random, MiqpProblem, QpKernel, QpSettings, QpStatus, SolverOpts};
use hmpc_core::SolveStatus;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ADMM splitting `x = z`-style on `A x + s = b, s >= 0`, run long enough to
/// serve as a slow reference. Each iteration projects onto the nonnegative
/// orthant, nothing else.
fn admm_reference(h: &Mat, f: &Vector, a: &Mat, b: &Vector) -> Vector {
    let rho = 1.0;
    let d = f.len();
    let m = b.len();
    let lhs = h + a.transpose() * a * rho + Mat::identity(d, d) * 1e-9;
    let chol = lhs.cholesky().expect("reference system is positive definite");
    let mut x = Vector::zeros(d);
    let mut z = Vector::zeros(m);
    let mut y = Vector::zeros(m);
    for _ in 0..200_000 {
        let rhs = -f + a.transpose() * (&z * rho - &y);
        x = chol.solve(&rhs);
        let ax = a * &x;
        let z_new = (&ax + &y / rho).zip_map(b, |v, bi| v.min(bi));
        y += (&ax - &z_new) * rho;
        let moved = (&z_new - &z).amax();
        z = z_new;
        if moved < 1e-13 && (&ax - &z).amax() < 1e-12 {
            break;
        }
    }
    x
}

#[test]
fn qp_kernel_matches_admm_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let d = rng.random_range(1..=6);
        let g = Mat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let h = &g * g.transpose() + Mat::identity(d, d) * 0.1;
        let f = Vector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        let m = rng.random_range(1..=8);
        let mut a = Mat::from_fn(m + 2 * d, d, |_, _| rng.random_range(-1.0..1.0));
        let center = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let mut b = &a * &center + Vector::from_fn(m + 2 * d, |_, _| rng.random_range(0.1..1.0));
        for i in 0..d {
            a.row_mut(m + 2 * i).fill(0.0);
            a.row_mut(m + 2 * i + 1).fill(0.0);
            a[(m + 2 * i, i)] = 1.0;
            a[(m + 2 * i + 1, i)] = -1.0;
            b[m + 2 * i] = 3.0;
            b[m + 2 * i + 1] = 3.0;
        }
        let kernel = QpKernel::new(h.clone(), f.clone(), a.clone());
        let out = kernel.solve(&b, None, &QpSettings::default());
        assert_eq!(out.status, QpStatus::Optimal);
        let reference = admm_reference(&h, &f, &a, &b);
        let j_ref = kernel.objective(&reference);
        assert!(
            (out.objective - j_ref).abs() < 1e-6,
            "kernel {} vs reference {j_ref}",
            out.objective
        );
    }
}

fn assert_matches_brute_force(p: &MiqpProblem) {
    let bb = miqp::solve(p, &SolverOpts::default()).unwrap();
    let oracle = miqp::brute_force(p, &SolverOpts::default()).unwrap();
    assert_eq!(bb.status, oracle.status);
    if bb.status == SolveStatus::Optimal {
        assert!(
            (bb.objective - oracle.objective).abs() <= 1e-6,
            "branch-and-bound {} vs enumeration {}",
            bb.objective,
            oracle.objective
        );
        assert!(p.constraint_residual(&bb.u) <= 1e-7);
        assert!(p.integrality_residual(&bb.u) <= 1e-6);
        assert!((p.objective(&bb.u) - bb.objective).abs() <= 1e-9 * (1.0 + bb.objective.abs()));
    }
}

#[test]
fn branch_and_bound_matches_enumeration_on_seeded_set() {
    let problems = random::instances(42, 200);
    let mut statuses = std::collections::BTreeMap::new();
    for p in &problems {
        assert_matches_brute_force(p);
        *statuses
            .entry(format!("{:?}", miqp::brute_force(p, &SolverOpts::default()).unwrap().status))
            .or_insert(0) += 1;
    }
    assert!(statuses.len() >= 2, "instance set lacks status variety: {statuses:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn branch_and_bound_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        assert_matches_brute_force(&random::instance(&mut rng));
    }

    #[test]
    fn first_index_branching_agrees(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random::instance(&mut rng);
        let a = miqp::solve(&p, &SolverOpts::default()).unwrap();
        let b = miqp::solve(&p, &SolverOpts {
            branching: miqp::Branching::FirstIndex,
            node_selection: Some(miqp::NodeSelection::DepthFirst),
            ..SolverOpts::default()
        }).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == SolveStatus::Optimal {
            prop_assert!((a.objective - b.objective).abs() <= 1e-6);
        }
    }
}
