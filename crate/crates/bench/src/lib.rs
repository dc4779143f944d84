//! Fixtures shared by the criterion benches.

use hmpc_core::lyapunov::LyapunovCertificate;
use hmpc_core::mpc::{Controller, Variant};
use hmpc_core::suspension::{build_mld, ExperimentConfig, SuspensionParams};
use hmpc_core::{SolverOpts, Vector};

/// The benchmark start state.
pub fn suspension_x0() -> Vector {
    Vector::from_column_slice(&[0.0, 0.0, 0.1, 0.0])
}

/// The benchmark certificate, built once per bench.
pub fn suspension_certificate() -> LyapunovCertificate {
    let config = ExperimentConfig::new(SuspensionParams::default(), Variant::LyapunovOptimal);
    let model = build_mld(&config.params).expect("model");
    config
        .certificate(&model)
        .expect("certificate")
        .expect("lyapunov variant")
        .0
}

/// A suspension controller for `variant` and `horizon` sharing `cert`.
pub fn suspension_controller(
    variant: Variant,
    horizon: usize,
    cert: &LyapunovCertificate,
    solver: SolverOpts,
) -> Controller {
    let mut config =
        ExperimentConfig::new(SuspensionParams::default(), variant).with_horizon(horizon);
    config.solver = solver;
    let model = build_mld(&config.params).expect("model");
    let cert = variant.needs_certificate().then_some(cert);
    Controller::new(config.controller_spec(cert), model).expect("controller")
}
