use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hmpc_bench::{suspension_certificate, suspension_controller, suspension_x0};
use hmpc_core::miqp::{self, random};
use hmpc_core::mpc::Variant;
use hmpc_core::suspension::{build_continuous, discretize, SuspensionParams};
use hmpc_core::SolverOpts;
use std::hint::black_box;

fn random_miqps(c: &mut Criterion) {
    let problems = random::instances(42, 50);
    let mut group = c.benchmark_group("random_miqp");
    for (name, opts) in [
        ("optimal", SolverOpts::default()),
        ("first_feasible", SolverOpts::first_feasible()),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| {
                for p in &problems {
                    black_box(miqp::solve(p, &opts).unwrap());
                }
            })
        });
    }
    group.bench_function("enumeration", |b| {
        b.iter(|| {
            for p in &problems {
                black_box(miqp::brute_force(p, &SolverOpts::default()).unwrap());
            }
        })
    });
    group.finish();
}

fn suspension_step(c: &mut Criterion) {
    let cert = suspension_certificate();
    let x0 = suspension_x0();
    let mut group = c.benchmark_group("suspension_first_step");
    group.sample_size(20);
    for (variant, n) in [
        (Variant::LyapunovOptimal, 1),
        (Variant::LyapunovOptimal, 5),
        (Variant::LyapunovFeasible, 5),
        (Variant::TerminalEquality, 5),
    ] {
        let ctrl = suspension_controller(variant, n, &cert, SolverOpts::default());
        group.bench_with_input(BenchmarkId::new(variant.name(), n), &x0, |b, x| {
            b.iter(|| black_box(ctrl.solve_step(x).unwrap()))
        });
    }
    group.finish();
}

fn discretization(c: &mut Criterion) {
    let p = SuspensionParams::default();
    let (a, b) = build_continuous(&p);
    c.bench_function("discretize_suspension", |bench| {
        bench.iter(|| black_box(discretize(&a, &b, p.ts)))
    });
}

criterion_group!(benches, random_miqps, suspension_step, discretization);
criterion_main!(benches);
