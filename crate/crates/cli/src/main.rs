//! `hmpc`: build models, synthesize certificates, solve MIQPs and run the
//! suspension benchmark from the command line.
//!
//! Exit codes: 0 success, 1 infeasible or failed run, 2 usage or input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hmpc_core::linalg::{mat_inf_norm, to_rows, Mat};
use hmpc_core::lyapunov::{certify_rows, decrease_margin, modal_facets, modal_y, synthesize_y, SynthOpts};
use hmpc_core::miqp::{self, random, SolveMode};
use hmpc_core::mpc::{probe_region, region_csv, CertificateSpec, Controller, ControllerSpec, GridSpec, Variant};
use hmpc_core::suspension::{
    build_mld, compare_variants, load_params, run_benchmark, summarize_log, write_outputs,
    ExperimentConfig, SuspensionParams, DEFAULT_SCAN_LIMIT,
};
use hmpc_core::{MiqpProblem, MldModel, SolveStatus, SolverOpts, Vector};

#[derive(Parser)]
#[command(name = "hmpc", version, about = "Stabilizing hybrid MPC for MLD systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed loop and write trajectory, control, timing and summary files.
    Simulate(SimulateArgs),
    /// Build a Lyapunov certificate for a model's state matrix.
    SynthY(SynthArgs),
    /// Solve one MIQP file, or a seeded random suite.
    SolveMiqp(SolveArgs),
    /// Run and compare the controller variants on the suspension preset.
    Bench(BenchArgs),
    /// Label grid points by step-0 (and optionally full-run) feasibility.
    ProbeRegion(ProbeArgs),
    /// Write the suspension MLD model as JSON.
    BuildModel(BuildArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Suspension,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Optimal,
    FirstFeasible,
}

impl From<Mode> for SolveMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Optimal => SolveMode::Optimal,
            Mode::FirstFeasible => SolveMode::FirstFeasible,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Row augmentation `Y <- [Y; Y A / theta]`.
    Augment,
    /// Per-mode polygons.
    Modal,
}

/// Where the plant and controller come from.
#[derive(Args)]
struct Setup {
    /// MLD model JSON.
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    /// Controller JSON (variant, N, weights, certificate, solver).
    #[arg(long, requires = "model")]
    controller: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Experiment JSON for the preset (params, weights, x0, T, Y source).
    #[arg(long, requires = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long = "N")]
    horizon: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    setup: Setup,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long = "T")]
    steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// MLD model JSON; the suspension preset when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Synthesize for `A + B1 k'`, with `k` comma separated (single input).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    feedback: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "augment")]
    method: Method,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    #[arg(long)]
    facets: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, required_unless_present = "random")]
    problem: Option<PathBuf>,
    /// Solve this many seeded random instances instead of a file.
    #[arg(long, conflicts_with = "problem")]
    random: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "optimal")]
    mode: Mode,
    /// Also enumerate all binary assignments and report agreement.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "suspension")]
    preset: Preset,
    /// Experiment JSON used as the base configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run all variants and emit the comparison table.
    #[arg(long)]
    compare: bool,
    #[arg(long = "T")]
    steps: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SCAN_LIMIT)]
    scan_limit: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    setup: Setup,
    /// Grid JSON; defaults to a 9x9 grid over (x3, x4) in [-0.2, 0.2]^2.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Also run this many steps from every feasible point.
    #[arg(long)]
    run_steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    /// Suspension parameter JSON; table defaults when absent.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn failed(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

type CliResult = Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::SynthY(a) => synth_y(a),
        Command::SolveMiqp(a) => solve_miqp(a),
        Command::Bench(a) => bench(a),
        Command::ProbeRegion(a) => probe(a),
        Command::BuildModel(a) => build_model(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| failed(format!("writing {}: {e}", path.display())))
}

/// A ready controller plus what the summary needs to know about it.
struct Resolved {
    controller: Controller,
    x0: Vector,
    steps: usize,
    assumptions: Option<String>,
}

fn experiment_config(setup: &Setup) -> Result<ExperimentConfig, Failure> {
    let mut config = match &setup.config {
        Some(p) => ExperimentConfig::load(p).map_err(usage)?,
        None => ExperimentConfig::new(
            SuspensionParams::default(),
            setup.variant.unwrap_or(Variant::LyapunovOptimal),
        ),
    };
    if let Some(v) = setup.variant {
        config.variant = v;
    }
    if let Some(n) = setup.horizon {
        config.params.horizon = n;
    }
    if setup.gamma.is_some() {
        config.gamma = setup.gamma;
    }
    if let Some(m) = setup.mode {
        config.solver.mode = m.into();
    }
    config.params.validate().map_err(usage)?;
    Ok(config)
}

fn resolve(setup: &Setup, x0: Option<Vec<f64>>, steps: Option<usize>) -> Result<Resolved, Failure> {
    if setup.preset.is_some() {
        let mut config = experiment_config(setup)?;
        if let Some(x) = x0 {
            config.x0 = x;
        }
        if let Some(t) = steps {
            config.steps = t;
        }
        let model = build_mld(&config.params).map_err(usage)?;
        let cert = config
            .certificate(&model)
            .map_err(failed)?
            .map(|(c, _)| c);
        let controller = Controller::new(config.controller_spec(cert.as_ref()), model).map_err(usage)?;
        return Ok(Resolved {
            controller,
            x0: config.x0().map_err(usage)?,
            steps: config.steps,
            assumptions: Some(config.params.assumptions()),
        });
    }
    let (Some(model), Some(controller)) = (&setup.model, &setup.controller) else {
        return Err(usage("give --model and --controller, or --preset suspension"));
    };
    let model = MldModel::load(model).map_err(usage)?;
    let mut spec = ControllerSpec::load(controller).map_err(usage)?;
    if let Some(v) = setup.variant {
        spec.variant = v;
    }
    if let Some(n) = setup.horizon {
        spec.horizon = n;
    }
    if let (Some(g), Some(c)) = (setup.gamma, spec.certificate.as_mut()) {
        c.gamma = g;
    }
    if let Some(m) = setup.mode {
        spec.solver.mode = m.into();
    }
    let n = model.dims.n();
    let x0 = match x0 {
        Some(x) if x.len() == n => Vector::from_vec(x),
        Some(x) => return Err(usage(format!("--x0 has {} entries, model has {n} states", x.len()))),
        None => Vector::zeros(n),
    };
    Ok(Resolved {
        controller: Controller::new(spec, model).map_err(usage)?,
        x0,
        steps: steps.unwrap_or(600),
        assumptions: None,
    })
}

fn simulate(a: SimulateArgs) -> CliResult {
    let r = resolve(&a.setup, a.x0, a.steps)?;
    let log = r.controller.run(&r.x0, r.steps, None).map_err(usage)?;
    let spec = &r.controller.spec;
    let summary = summarize_log(
        format!("{} N={}", spec.variant.name(), spec.horizon),
        spec.variant,
        spec.horizon,
        r.steps,
        &log,
        r.controller.certificate(),
        r.assumptions,
    );
    let files = write_outputs(&a.out, &log, &summary).map_err(failed)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    println!(
        "completed={} settling_step={:?} decrease_pass_rate={:?} beta={:?}",
        summary.completed, summary.settling_step, summary.decrease_pass_rate, summary.beta
    );
    for note in &summary.notes {
        println!("note: {note}");
    }
    Ok(if summary.completed { 0 } else { 1 })
}

fn synth_y(a: SynthArgs) -> CliResult {
    let model = match &a.model {
        Some(p) => MldModel::load(p).map_err(usage)?,
        None => build_mld(&SuspensionParams::default()).map_err(usage)?,
    };
    let n = model.dims.n();
    let mut dynamics: Mat = model.a.clone();
    if let Some(k) = &a.feedback {
        if model.dims.m() != 1 || k.len() != n {
            return Err(usage(format!(
                "--feedback needs a single-input model and {n} gains, got {} inputs and {} gains",
                model.dims.m(),
                k.len()
            )));
        }
        dynamics += &model.b1 * Mat::from_row_slice(1, n, k);
    }
    if let Some(g) = a.gamma {
        if !(g > 0.0) {
            return Err(usage("--gamma must be positive"));
        }
    }
    let result = match a.method {
        Method::Augment => {
            let opts = SynthOpts {
                y0: None,
                theta_target: a.theta,
                max_iters: a.max_iters,
            };
            synthesize_y(&dynamics, a.gamma.unwrap_or(0.01), &opts)
        }
        Method::Modal => {
            let rho = hmpc_core::linalg::spectral_radius(&dynamics);
            let facets = match a.facets {
                Some(f) => Some(f),
                None => modal_facets(rho, a.theta.unwrap_or(0.5 * (1.0 + rho))),
            };
            match facets {
                None => Err(hmpc_core::lyapunov::SynthesisError::NotStable(rho)),
                Some(f) => modal_y(&dynamics, f).and_then(|y| {
                    let gamma = match a.gamma {
                        Some(g) => g,
                        None => 0.5 * decrease_margin(&y, &dynamics).unwrap_or(0.0),
                    };
                    certify_rows(&y, &dynamics, gamma)
                }),
            }
        }
    };
    let (cert, report) = result.map_err(failed)?;
    let spec = CertificateSpec {
        y: to_rows(cert.y()),
        gamma: cert.gamma(),
    };
    write_file(&a.out, &serde_json::to_string_pretty(&spec).map_err(failed)?)?;
    println!(
        "||Y||_inf = {:.6}, theta = {:.9}, gamma = {:.3e}, rows = {}, contraction = {:.9}",
        mat_inf_norm(cert.y()),
        cert.theta(),
        cert.gamma(),
        report.rows,
        report.contraction
    );
    Ok(0)
}

fn solve_miqp(a: SolveArgs) -> CliResult {
    let opts = SolverOpts {
        mode: a.mode.into(),
        ..SolverOpts::default()
    };
    if let Some(count) = a.random {
        let problems = random::instances(a.seed, count);
        let mut agree = 0;
        let mut solved = 0;
        for p in &problems {
            let s = miqp::solve(p, &opts).map_err(failed)?;
            solved += usize::from(s.status.has_solution());
            if a.oracle {
                let o = miqp::brute_force(p, &SolverOpts::default()).map_err(failed)?;
                agree += usize::from(agrees(&s, &o, a.mode));
            }
        }
        println!("solved: {solved}/{count}");
        if a.oracle {
            println!("agree: {agree}/{count}");
            return Ok(if agree == count { 0 } else { 1 });
        }
        return Ok(0);
    }
    let path = a.problem.expect("required by clap");
    let problem = MiqpProblem::load(&path).map_err(usage)?;
    let solution = miqp::solve(&problem, &opts).map_err(usage)?;
    let json = solution.to_json();
    match &a.out {
        Some(p) => write_file(p, &json)?,
        None => println!("{json}"),
    }
    if a.oracle {
        let o = miqp::brute_force(&problem, &SolverOpts::default()).map_err(failed)?;
        let ok = agrees(&solution, &o, a.mode);
        println!("agree: {}/1", usize::from(ok));
        if !ok {
            return Ok(1);
        }
    }
    Ok(match solution.status {
        SolveStatus::Optimal | SolveStatus::FirstFeasible => 0,
        SolveStatus::Infeasible | SolveStatus::NodeLimit => 1,
    })
}

/// Optimal mode must match status and objective; first-feasible mode must
/// match feasibility and return a point no better than the optimum.
fn agrees(s: &hmpc_core::Solution, oracle: &hmpc_core::Solution, mode: Mode) -> bool {
    match mode {
        Mode::Optimal => {
            s.status == oracle.status
                && (s.status != SolveStatus::Optimal || (s.objective - oracle.objective).abs() <= 1e-6)
        }
        Mode::FirstFeasible => {
            s.status.has_solution() == oracle.status.has_solution()
                && (!s.status.has_solution() || s.objective >= oracle.objective - 1e-6)
        }
    }
}

fn bench_configs(a: &BenchArgs) -> Result<Vec<ExperimentConfig>, Failure> {
    let Preset::Suspension = a.preset;
    let mut base = match &a.config {
        Some(p) => ExperimentConfig::load(p).map_err(usage)?,
        None => ExperimentConfig::new(SuspensionParams::default(), Variant::LyapunovOptimal),
    };
    if let Some(t) = a.steps {
        base.steps = t;
    }
    if !a.compare {
        return Ok(vec![base]);
    }
    let with = |variant: Variant, n: usize| {
        let mut c = base.clone();
        c.variant = variant;
        c.params.horizon = n;
        c
    };
    Ok(vec![
        with(Variant::LyapunovOptimal, 1),
        with(Variant::LyapunovOptimal, 5),
        with(Variant::LyapunovFeasible, 5),
        with(Variant::TerminalEquality, 5),
    ])
}

fn bench(a: BenchArgs) -> CliResult {
    let configs = bench_configs(&a)?;
    if !a.compare {
        let run = run_benchmark(&configs[0]).map_err(failed)?;
        if let Some(dir) = &a.out {
            write_outputs(dir, &run.log, &run.summary).map_err(failed)?;
        }
        println!("{}", serde_json::to_string_pretty(&run.summary).map_err(failed)?);
        return Ok(if run.summary.completed { 0 } else { 1 });
    }
    let cmp = compare_variants(&configs, a.scan_limit).map_err(failed)?;
    let md = cmp.to_markdown();
    print!("{md}");
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(failed)?;
        write_file(&dir.join("comparison.md"), &md)?;
        write_file(&dir.join("comparison.csv"), &cmp.to_csv().map_err(failed)?)?;
        if let Some(scan) = &cmp.scan {
            write_file(
                &dir.join("terminal_scan.json"),
                &serde_json::to_string_pretty(scan).map_err(failed)?,
            )?;
        }
    }
    // The Lyapunov runs are mandatory; the terminal row documents its horizon need.
    let mandatory_ok = cmp
        .rows
        .iter()
        .filter(|r| r.variant != Variant::TerminalEquality)
        .all(|r| r.completed);
    Ok(if mandatory_ok { 0 } else { 1 })
}

fn probe(a: ProbeArgs) -> CliResult {
    let r = resolve(&a.setup, None, None)?;
    let mut grid = match &a.grid {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(usage)?;
            serde_json::from_str::<GridSpec>(&text).map_err(usage)?
        }
        None => GridSpec {
            base: vec![0.0; r.controller.model.dims.n()],
            axes: [2, 3],
            lo: [-0.2, -0.2],
            hi: [0.2, 0.2],
            counts: [9, 9],
            run_steps: None,
        },
    };
    if a.run_steps.is_some() {
        grid.run_steps = a.run_steps;
    }
    let points = probe_region(&r.controller, &grid).map_err(usage)?;
    let csv = region_csv(&points).map_err(failed)?;
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }
    println!(
        "feasible: {}/{}",
        points.iter().filter(|p| p.feasible).count(),
        points.len()
    );
    Ok(0)
}

fn build_model(a: BuildArgs) -> CliResult {
    let params = match &a.params {
        Some(p) => load_params(p).map_err(usage)?,
        None => SuspensionParams::default(),
    };
    let model = build_mld(&params).map_err(usage)?;
    model.save(&a.out).map_err(failed)?;
    let d = model.dims;
    println!(
        "n={} m={} r_l={} r_c={} rows={} ({})",
        d.n(),
        d.m(),
        d.r_l,
        d.r_c,
        d.q_e,
        params.assumptions()
    );
    Ok(0)
}
