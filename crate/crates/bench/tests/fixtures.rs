use hmpc_bench::{suspension_certificate, suspension_controller, suspension_x0};
use hmpc_core::mpc::Variant;
use hmpc_core::SolverOpts;

#[test]
fn fixtures_build_and_solve_the_first_step() {
    let cert = suspension_certificate();
    let x0 = suspension_x0();
    let lyapunov = suspension_controller(Variant::LyapunovOptimal, 1, &cert, SolverOpts::default());
    assert!(lyapunov.solve_step(&x0).unwrap().feasible());
    let terminal = suspension_controller(Variant::TerminalEquality, 5, &cert, SolverOpts::default());
    assert!(!terminal.solve_step(&x0).unwrap().feasible());
}
