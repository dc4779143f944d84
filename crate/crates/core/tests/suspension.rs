use hmpc_core::linalg::{Mat, Vector};
use hmpc_core::lyapunov::{check_certificate, verify_contraction};
use hmpc_core::mpc::Variant;
use hmpc_core::suspension::*;
use proptest::prelude::*;

/// Classical RK4 on the augmented system `[A B; 0 0]`.
fn rk4(a: &Mat, b: &Mat, ts: f64, steps: usize) -> (Mat, Mat) {
    let (n, m) = (a.nrows(), b.ncols());
    let mut aug = Mat::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(b);
    let h = ts / steps as f64;
    let f = |x: &Mat| &aug * x;
    let mut phi = Mat::identity(n + m, n + m);
    for _ in 0..steps {
        let k1 = f(&phi);
        let k2 = f(&(&phi + &k1 * (h / 2.0)));
        let k3 = f(&(&phi + &k2 * (h / 2.0)));
        let k4 = f(&(&phi + &k3 * h));
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    (
        phi.view((0, 0), (n, n)).into_owned(),
        phi.view((0, n), (n, m)).into_owned(),
    )
}

#[test]
fn discretization_matches_rk4_for_all_assumption_sets() {
    for units in [FrequencyUnits::Hertz, FrequencyUnits::RadPerSec] {
        for zeta in [0.0, 0.3] {
            let p = SuspensionParams {
                units,
                zeta,
                ..SuspensionParams::default()
            };
            let (a, b) = build_continuous(&p);
            let (ad, bd) = discretize(&a, &b, p.ts);
            let (ar, br) = rk4(&a, &b, p.ts, 2000);
            let err = (&ad - &ar).amax().max((&bd - &br).amax());
            assert!(err < 1e-10, "{units:?} zeta={zeta}: {err}");
        }
    }
}

#[test]
fn undamped_plant_is_marginally_stable() {
    let model = build_mld(&SuspensionParams::default()).unwrap();
    let rho = hmpc_core::linalg::spectral_radius(&model.a);
    assert!((rho - 1.0).abs() < 1e-9, "{rho}");
    let damped = damped_dynamics(&model, 1.0);
    assert!(hmpc_core::linalg::spectral_radius(&damped) < 1.0);
}

#[test]
fn modal_certificate_is_verified_independently() {
    let params = SuspensionParams::default();
    let model = build_mld(&params).unwrap();
    let x0 = Vector::from_column_slice(&[0.0, 0.0, 0.1, 0.0]);
    let choice = select_passive_gain(&params, &model, &x0, None).unwrap();
    assert!(choice.gain > 0.0 && choice.gain <= params.max_gain());
    assert!(choice.gain * choice.velocity_bound <= params.sigma);
    let config = ExperimentConfig::new(params, Variant::LyapunovOptimal);
    let (cert, report) = config.certificate(&model).unwrap().unwrap();
    let report = report.unwrap();
    assert!(report.contraction < 1.0);
    let rechecked = check_certificate(cert.y(), cert.gamma()).unwrap();
    assert_eq!(rechecked.theta(), cert.theta());
    assert!(verify_contraction(&cert, &damped_dynamics(&model, choice.gain)));
}

#[test]
fn closed_loop_points_satisfy_the_damper_constraints() {
    let params = SuspensionParams::default();
    let mut config = ExperimentConfig::new(params.clone(), Variant::LyapunovOptimal).with_horizon(1);
    config.steps = 200;
    let run = run_benchmark(&config).unwrap();
    assert!(run.log.completed());
    for r in run.log.records.iter().filter(|r| r.applied()) {
        let f = r.u[0];
        assert!(f.abs() <= params.sigma + 1e-9);
        let v = r.x[3] - r.x[1];
        let c = params.max_gain();
        // Direct check with the solver tolerance on the products.
        assert!(f * v >= -1e-6 && f * v <= c * v * v + 1e-6, "t={} f={f} v={v}", r.t);
    }
}

#[test]
fn terminal_horizon_five_is_infeasible_at_start() {
    let mut config = ExperimentConfig::new(SuspensionParams::default(), Variant::TerminalEquality)
        .with_horizon(5);
    config.steps = 10;
    let run = run_benchmark(&config).unwrap();
    assert_eq!(run.summary.infeasible_at, Some(0));
    assert!(!run.summary.completed);
}

#[test]
fn outputs_parse_back_and_agree_with_summary() {
    let mut config = ExperimentConfig::new(SuspensionParams::default(), Variant::LyapunovFeasible)
        .with_horizon(1);
    config.steps = 40;
    let run = run_benchmark(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_outputs(dir.path(), &run.log, &run.summary).unwrap();
    assert_eq!(files.len(), OUTPUT_FILES.len());
    for f in &files {
        assert!(f.exists(), "{f:?}");
    }
    let count = |name: &str| {
        csv::Reader::from_path(dir.path().join(name))
            .unwrap()
            .records()
            .inspect(|r| assert!(r.is_ok()))
            .count()
    };
    assert_eq!(count("times.csv"), run.summary.logged_steps);
    assert_eq!(count("control.csv"), run.summary.logged_steps);
    assert_eq!(count("trajectory.csv"), run.summary.logged_steps + 1);
    let mut rdr = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    let first = rdr.records().next().unwrap().unwrap();
    let x1: Vec<f64> = (1..5).map(|i| first[i].parse().unwrap()).collect();
    assert_eq!(x1, config.x0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["logged_steps"], run.summary.logged_steps);
    let plot = std::fs::read_to_string(dir.path().join("plot.gp")).unwrap();
    assert!(plot.contains("'trajectory.csv'") && !plot.contains(dir.path().to_str().unwrap()));
}

#[test]
fn identical_configs_give_identical_rows() {
    let mut config = ExperimentConfig::new(SuspensionParams::default(), Variant::LyapunovOptimal)
        .with_horizon(1);
    config.steps = 50;
    let cmp = compare_variants(&[config.clone(), config], 5).unwrap();
    let strip = |r: &ComparisonRow| ComparisonRow {
        median_ms: 0.0,
        max_ms: 0.0,
        ..r.clone()
    };
    assert_eq!(strip(&cmp.rows[0]), strip(&cmp.rows[1]));
    assert!(cmp.to_markdown().lines().count() >= 4);
    assert_eq!(cmp.to_csv().unwrap().lines().count(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn discretization_is_a_semigroup(
        entries in proptest::collection::vec(-5.0..5.0f64, 9),
        t1 in 0.001..0.05f64,
        t2 in 0.001..0.05f64,
    ) {
        let a = Mat::from_row_slice(3, 3, &entries);
        let b = Mat::zeros(3, 1);
        let (p1, _) = discretize(&a, &b, t1);
        let (p2, _) = discretize(&a, &b, t2);
        let (p12, _) = discretize(&a, &b, t1 + t2);
        prop_assert!((p1 * p2 - &p12).amax() <= 1e-11 * (1.0 + p12.amax()));
    }

    #[test]
    fn implied_logic_satisfies_the_encoding(
        x in proptest::collection::vec(-1.0..1.0f64, 4),
        frac in 0.0..1.0f64,
    ) {
        let p = SuspensionParams::default();
        let model = build_mld(&p).unwrap();
        let x = Vector::from_vec(x);
        let v = x[3] - x[1];
        let f = (frac * p.max_gain() * v).clamp(-p.sigma, p.sigma);
        if damper_admissible(&p, &x, f) {
            let (d, z) = implied_logic(&p, &x, f);
            prop_assert!(model.constraint_residual(&x, &Vector::from_element(1, f), &d, &z) <= 1e-9);
        }
    }
}
