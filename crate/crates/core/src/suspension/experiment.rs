//! Closed-loop experiments on the suspension benchmark.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{build_mld, SuspensionParams};
use crate::error::{Error, Result};
use crate::linalg::{mat_inf_norm, spectral_radius, Mat, Vector};
use crate::lyapunov::{
    certify_rows, check_decrease_trajectory, check_certificate, decrease_margin, fit_envelope,
    max_over_unit_ball, modal_facets, modal_y, synthesize_y, LyapunovCertificate, SynthOpts,
    SynthesisReport, ALPHA_MAX, TRAJECTORY_TOL,
};
use crate::miqp::{SolveMode, SolverOpts};
use crate::mld::MldModel;
use crate::mpc::{CertificateSpec, ClosedLoopLog, Controller, ControllerSpec, Variant, Weight};

/// Threshold on `||x||_inf` used for settling times.
pub const SETTLE_TOL: f64 = 1e-3;
/// Terminal-horizon threshold reported for the benchmark, with the band of
/// values accepted as a reproduction.
pub const REFERENCE_N_STAR: usize = 13;
pub const N_STAR_BAND: (usize, usize) = (10, 16);
/// Largest horizon tried by the terminal scan unless configured.
pub const DEFAULT_SCAN_LIMIT: usize = 30;

/// Where the Lyapunov matrix comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum YSource {
    Identity,
    /// Synthesized for the plant closed by the passive law
    /// `f = gain (x4 - x2)`; `gain = 0` uses the open-loop dynamics.
    Synthesized {
        gain: f64,
        #[serde(default)]
        theta_target: Option<f64>,
        #[serde(default = "default_synth_iters")]
        max_iters: usize,
    },
    /// Per-mode polygons for the plant under the passive law; `gain` and
    /// `facets` are chosen automatically when absent.
    Modal {
        #[serde(default)]
        gain: Option<f64>,
        #[serde(default)]
        facets: Option<usize>,
    },
    /// A certificate JSON file `{"Y": [[..]], "gamma": ..}`.
    File { path: PathBuf },
    /// Rows given inline.
    Rows {
        #[serde(rename = "Y")]
        y: Vec<Vec<f64>>,
    },
}

fn default_synth_iters() -> usize {
    400
}

impl Default for YSource {
    fn default() -> Self {
        Self::Modal {
            gain: None,
            facets: None,
        }
    }
}

fn default_x0() -> Vec<f64> {
    vec![0.0, 0.0, 0.1, 0.0]
}

fn default_steps() -> usize {
    600
}

fn unit_weight() -> Weight {
    Weight::Scalar(1.0)
}

fn zero_weight() -> Weight {
    Weight::Scalar(0.0)
}

/// One closed-loop experiment. Weights default to `Q1 = 1`, `Q4 = I` and
/// zero elsewhere. `gamma` defaults to `0.01 ||Y||_inf` for fixed `Y` and
/// to half the certified decrease margin for constructed `Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub params: SuspensionParams,
    pub variant: Variant,
    #[serde(default = "default_x0")]
    pub x0: Vec<f64>,
    #[serde(rename = "T", default = "default_steps")]
    pub steps: usize,
    #[serde(rename = "Q1", default = "unit_weight")]
    pub q1: Weight,
    #[serde(rename = "Q2", default = "zero_weight")]
    pub q2: Weight,
    #[serde(rename = "Q3", default = "zero_weight")]
    pub q3: Weight,
    #[serde(rename = "Q4", default = "unit_weight")]
    pub q4: Weight,
    #[serde(rename = "Q5", default = "zero_weight")]
    pub q5: Weight,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub y_source: YSource,
    #[serde(default)]
    pub solver: SolverOpts,
}

impl ExperimentConfig {
    pub fn new(params: SuspensionParams, variant: Variant) -> Self {
        Self {
            params,
            variant,
            x0: default_x0(),
            steps: default_steps(),
            q1: unit_weight(),
            q2: zero_weight(),
            q3: zero_weight(),
            q4: unit_weight(),
            q5: zero_weight(),
            gamma: None,
            y_source: YSource::default(),
            solver: SolverOpts::default(),
        }
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.params.horizon = horizon;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn x0(&self) -> Result<Vector> {
        if self.x0.len() != 4 || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("x0 must be 4 finite numbers, got {:?}", self.x0)));
        }
        Ok(Vector::from_column_slice(&self.x0))
    }

    /// Short label for tables.
    pub fn label(&self) -> String {
        format!("{} N={}", self.variant.name(), self.params.horizon)
    }

    /// Resolves the certificate for the Lyapunov variants.
    pub fn certificate(
        &self,
        model: &MldModel,
    ) -> Result<Option<(LyapunovCertificate, Option<SynthesisReport>)>> {
        if !self.variant.needs_certificate() {
            return Ok(None);
        }
        let admissible = |y: &Mat, gamma: Option<f64>| -> Result<LyapunovCertificate> {
            let g = gamma.unwrap_or(0.01 * mat_inf_norm(y));
            check_certificate(y, g).map_err(|e| Error::Invalid(e.to_string()))
        };
        let out = match &self.y_source {
            YSource::Identity => (admissible(&Mat::identity(4, 4), self.gamma)?, None),
            YSource::Rows { y } => {
                let y = crate::linalg::from_rows(y, 4).map_err(Error::Format)?;
                (admissible(&y, self.gamma)?, None)
            }
            YSource::File { path } => {
                let spec: CertificateSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                let y = crate::linalg::from_rows(&spec.y, 4).map_err(Error::Format)?;
                (admissible(&y, self.gamma.or(Some(spec.gamma)))?, None)
            }
            YSource::Modal { gain, facets } => {
                let x0 = self.x0()?;
                let choice = match gain {
                    Some(k) => modal_choice(&self.params, model, &x0, *k, *facets)?,
                    None => select_passive_gain(&self.params, model, &x0, *facets)?,
                };
                let a = damped_dynamics(model, choice.gain);
                let gamma = match self.gamma {
                    Some(g) => g,
                    None => 0.5 * decrease_margin(&choice.y, &a).ok_or_else(|| {
                        Error::Invalid("modal certificate is not contractive".into())
                    })?,
                };
                let (cert, report) = certify_rows(&choice.y, &a, gamma)
                    .map_err(|e| Error::Invalid(format!("modal certificate: {e}")))?;
                (cert, Some(report))
            }
            YSource::Synthesized {
                gain,
                theta_target,
                max_iters,
            } => {
                let a = damped_dynamics(model, *gain);
                let opts = SynthOpts {
                    y0: None,
                    theta_target: *theta_target,
                    max_iters: *max_iters,
                };
                let gamma = self.gamma.unwrap_or(0.01);
                let (cert, report) = synthesize_y(&a, gamma, &opts)
                    .map_err(|e| Error::Invalid(format!("synthesis: {e}")))?;
                (cert, Some(report))
            }
        };
        Ok(Some(out))
    }

    pub fn controller_spec(&self, cert: Option<&LyapunovCertificate>) -> ControllerSpec {
        let mut spec = ControllerSpec::new(self.variant, self.params.horizon);
        spec.q1 = self.q1.clone();
        spec.q2 = self.q2.clone();
        spec.q3 = self.q3.clone();
        spec.q4 = self.q4.clone();
        spec.q5 = self.q5.clone();
        spec.certificate = cert.map(CertificateSpec::from_certificate);
        spec.solver = self.solver.clone();
        spec
    }
}

/// `A + B gain (x4 - x2)`: the discrete plant under a passive damper.
pub fn damped_dynamics(model: &MldModel, gain: f64) -> Mat {
    let mut k = Mat::zeros(1, 4);
    k[(0, 1)] = -gain;
    k[(0, 3)] = gain;
    &model.a + &model.b1 * k
}

/// A passive gain with its modal `Y` and the bound on `|x4 - x2|` over the
/// sublevel set through `x0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalChoice {
    pub gain: f64,
    pub facets: usize,
    pub rho: f64,
    pub y: Mat,
    pub velocity_bound: f64,
}

fn modal_choice(
    params: &SuspensionParams,
    model: &MldModel,
    x0: &Vector,
    gain: f64,
    facets: Option<usize>,
) -> Result<ModalChoice> {
    let a = damped_dynamics(model, gain);
    let rho = spectral_radius(&a);
    let facets = match facets {
        Some(f) => f,
        None => modal_facets(rho, 0.5 * (1.0 + rho)).ok_or_else(|| {
            Error::Invalid(format!("passive gain {gain} leaves spectral radius {rho} >= 1"))
        })?,
    };
    let y = modal_y(&a, facets).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut e = Vector::zeros(4);
    e[1] = -1.0;
    e[3] = 1.0;
    let v0 = (&y * x0).amax();
    let support = max_over_unit_ball(&y, &e)
        .ok_or_else(|| Error::Invalid("velocity bound LP failed".into()))?;
    let _ = params;
    Ok(ModalChoice {
        gain,
        facets,
        rho,
        y,
        velocity_bound: v0 * support,
    })
}

/// Picks the passive gain with the smallest spectral radius among those whose
/// force `gain |x4 - x2|` stays within `sigma` on the sublevel set through `x0`.
pub fn select_passive_gain(
    params: &SuspensionParams,
    model: &MldModel,
    x0: &Vector,
    facets: Option<usize>,
) -> Result<ModalChoice> {
    let c = params.max_gain();
    let mut best: Option<ModalChoice> = None;
    for i in 0..40 {
        let k = c * 10f64.powf(-4.0 * (39 - i) as f64 / 39.0);
        let Ok(choice) = modal_choice(params, model, x0, k, facets) else {
            continue;
        };
        if k * choice.velocity_bound > params.sigma {
            continue;
        }
        if best.as_ref().is_none_or(|b| choice.rho < b.rho) {
            best = Some(choice);
        }
    }
    best.ok_or_else(|| {
        Error::Invalid(format!(
            "no passive gain keeps the damper force within sigma (assumptions: {})",
            params.assumptions()
        ))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub variant: Variant,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub steps: usize,
    pub completed: bool,
    pub infeasible_at: Option<usize>,
    /// First step from which `||x||_inf <= 1e-3` holds to the end.
    pub settling_step: Option<usize>,
    pub final_norm: Option<f64>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub y_rows: Option<usize>,
    /// Fraction of steps meeting the decrease condition at tolerance 1e-6.
    pub decrease_pass_rate: Option<f64>,
    pub decrease_all: Option<bool>,
    /// Theta-rate envelope check, only for `Y = I`.
    pub geometric_all: Option<bool>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub median_ms: f64,
    pub max_ms: f64,
    pub total_nodes: usize,
    pub logged_steps: usize,
    pub assumptions: Option<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct BenchmarkRun {
    pub config: ExperimentConfig,
    pub model: MldModel,
    pub certificate: Option<LyapunovCertificate>,
    pub synthesis: Option<SynthesisReport>,
    pub log: ClosedLoopLog,
    pub summary: RunSummary,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// First index from which every norm stays at or below `tol`.
pub fn settling_step(states: &[Vector], tol: f64) -> Option<usize> {
    let last_bad = states.iter().rposition(|x| x.amax() > tol);
    match last_bad {
        None => Some(0),
        Some(i) if i + 1 < states.len() => Some(i + 1),
        Some(_) => None,
    }
}

/// Builds the model and controller for `config` and runs it.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkRun> {
    let model = build_mld(&config.params)?;
    let resolved = config.certificate(&model)?;
    let (certificate, synthesis) = match resolved {
        Some((c, r)) => (Some(c), r),
        None => (None, None),
    };
    let spec = config.controller_spec(certificate.as_ref());
    let controller = Controller::new(spec, model.clone())?;
    let x0 = config.x0()?;
    let log = controller.run(&x0, config.steps, None)?;
    let summary = summarize(config, &log, certificate.as_ref());
    Ok(BenchmarkRun {
        config: config.clone(),
        model,
        certificate,
        synthesis,
        log,
        summary,
    })
}

pub fn summarize(
    config: &ExperimentConfig,
    log: &ClosedLoopLog,
    cert: Option<&LyapunovCertificate>,
) -> RunSummary {
    summarize_log(
        config.label(),
        config.variant,
        config.params.horizon,
        config.steps,
        log,
        cert,
        Some(config.params.assumptions()),
    )
}

/// Summary of any closed-loop log; `assumptions` describes the plant when known.
pub fn summarize_log(
    label: String,
    variant: Variant,
    horizon: usize,
    steps: usize,
    log: &ClosedLoopLog,
    cert: Option<&LyapunovCertificate>,
    assumptions: Option<String>,
) -> RunSummary {
    let states = log.applied_states();
    let times: Vec<f64> = log.records.iter().map(|r| r.ms).collect();
    let decrease = cert.map(|c| check_decrease_trajectory(&states, c, TRAJECTORY_TOL));
    let fit = fit_envelope(&states, 0, ALPHA_MAX).ok();
    let mut notes = Vec::new();
    if let Some(t) = log.infeasible_at() {
        notes.push(if t == 0 {
            "infeasible at step 0: no admissible first move from x0".to_string()
        } else {
            format!("infeasible at step {t}; log truncated")
        });
    }
    RunSummary {
        label,
        variant,
        horizon,
        steps,
        completed: log.completed(),
        infeasible_at: log.infeasible_at(),
        settling_step: log.completed().then(|| settling_step(&states, SETTLE_TOL)).flatten(),
        final_norm: log.final_state.as_ref().map(|x| x.amax()),
        gamma: cert.map(|c| c.gamma()),
        theta: cert.map(|c| c.theta()),
        y_rows: cert.map(|c| c.row_count()),
        decrease_pass_rate: decrease.as_ref().map(|d| d.pass_rate()),
        decrease_all: decrease.as_ref().map(|d| d.all_pass()),
        geometric_all: decrease
            .as_ref()
            .and_then(|d| d.geometric.as_ref().map(|g| g.iter().all(|&b| b))),
        alpha: fit.as_ref().map(|f| f.alpha),
        beta: fit.as_ref().map(|f| f.beta),
        median_ms: median(&times),
        max_ms: times.iter().copied().fold(0.0, f64::max),
        total_nodes: log.records.iter().map(|r| r.nodes).sum(),
        logged_steps: log.records.len(),
        assumptions,
        notes,
    }
}

/// Files written by [`write_outputs`].
pub const OUTPUT_FILES: [&str; 5] = [
    "trajectory.csv",
    "control.csv",
    "times.csv",
    "summary.json",
    "plot.gp",
];

/// Writes the trajectory, control and solve-time CSVs, the summary and a
/// gnuplot script reading the CSVs from the same directory.
pub fn write_outputs(
    dir: &Path,
    log: &ClosedLoopLog,
    summary: &impl Serialize,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let shape = log.shape;
    let path = |name: &str| dir.join(name);

    let mut w = csv::Writer::from_path(path("trajectory.csv"))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=shape.n).map(|i| format!("x{i}")));
    header.push("V".into());
    w.write_record(&header)?;
    let mut rows: Vec<(usize, &Vector, Option<f64>)> =
        log.records.iter().map(|r| (r.t, &r.x, r.v)).collect();
    if let Some(x) = &log.final_state {
        rows.push((log.records.len(), x, log.final_v));
    }
    for (t, x, v) in rows {
        let mut rec = vec![t.to_string()];
        rec.extend(x.iter().map(|v| v.to_string()));
        rec.push(v.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(path("control.csv"))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=shape.m).map(|i| format!("u{i}")));
    header.extend((1..=shape.r_l).map(|i| format!("delta{i}")));
    header.extend((1..=shape.r_c).map(|i| format!("z{i}")));
    header.push("J".into());
    w.write_record(&header)?;
    for r in log.records.iter().filter(|r| r.applied()) {
        let mut rec = vec![r.t.to_string()];
        for v in [&r.u, &r.delta, &r.z] {
            rec.extend(v.iter().map(|x| x.to_string()));
        }
        rec.push(r.j.map(|j| j.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(path("times.csv"))?;
    w.write_record(["t", "ms", "nodes", "status"])?;
    for r in &log.records {
        w.write_record([
            r.t.to_string(),
            r.ms.to_string(),
            r.nodes.to_string(),
            format!("{:?}", r.status),
        ])?;
    }
    w.flush()?;

    std::fs::write(path("summary.json"), serde_json::to_string_pretty(summary)?)?;

    let mut gp = std::fs::File::create(path("plot.gp"))?;
    writeln!(gp, "set datafile separator ','")?;
    writeln!(gp, "set key autotitle columnhead")?;
    writeln!(gp, "set terminal pngcairo size 900,1200")?;
    writeln!(gp, "set output 'plot.png'")?;
    writeln!(gp, "set multiplot layout 3,1")?;
    writeln!(gp, "set xlabel 'step'")?;
    let series: Vec<String> = (2..=shape.n + 1)
        .map(|c| format!("'trajectory.csv' using 1:{c} with lines"))
        .collect();
    writeln!(gp, "set title 'states'")?;
    writeln!(gp, "plot {}", series.join(", "))?;
    writeln!(gp, "set title 'control'")?;
    writeln!(gp, "plot 'control.csv' using 1:2 with steps")?;
    writeln!(gp, "set title 'solve time [ms]'")?;
    writeln!(gp, "plot 'times.csv' using 1:2 with lines")?;
    writeln!(gp, "unset multiplot")?;

    Ok(OUTPUT_FILES.iter().map(|f| path(f)).collect())
}

/// Outcome of the increasing-horizon scan for the terminal controller.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminalScan {
    /// Horizons tried with whether step 0 was feasible.
    pub tried: Vec<(usize, bool)>,
    pub n_star: Option<usize>,
    pub limit: usize,
    pub assumptions: String,
    /// Set when `n_star` is missing or outside [`N_STAR_BAND`].
    pub diagnostic: Option<String>,
}

/// Smallest `N` for which the terminal-equality problem is feasible at `x0`,
/// scanning `N = 1, 2, ..` up to `limit`.
pub fn terminal_scan(
    params: &SuspensionParams,
    x0: &Vector,
    limit: usize,
    solver: &SolverOpts,
) -> Result<TerminalScan> {
    let model = build_mld(params)?;
    let mut tried = Vec::new();
    let mut n_star = None;
    let mut opts = solver.clone();
    opts.mode = SolveMode::FirstFeasible;
    for n in 1..=limit {
        let spec = ControllerSpec {
            solver: opts.clone(),
            ..ControllerSpec::new(Variant::TerminalEquality, n)
        };
        let ok = Controller::new(spec, model.clone())?.solve_step(x0)?.feasible();
        log::info!("terminal scan N={n}: {}", if ok { "feasible" } else { "infeasible" });
        tried.push((n, ok));
        if ok {
            n_star = Some(n);
            break;
        }
    }
    let assumptions = params.assumptions();
    let diagnostic = match n_star {
        Some(n) if (N_STAR_BAND.0..=N_STAR_BAND.1).contains(&n) => None,
        Some(n) => Some(format!(
            "N* = {n} is outside [{}, {}] (reference {REFERENCE_N_STAR}) under assumptions: {assumptions}",
            N_STAR_BAND.0, N_STAR_BAND.1
        )),
        None => Some(format!(
            "no feasible horizon up to N = {limit} (reference {REFERENCE_N_STAR}, band [{}, {}]) under assumptions: {assumptions}",
            N_STAR_BAND.0, N_STAR_BAND.1
        )),
    };
    Ok(TerminalScan {
        tried,
        n_star,
        limit,
        assumptions,
        diagnostic,
    })
}

/// One row of the variant comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub variant: Variant,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub completed: bool,
    pub infeasible_at: Option<usize>,
    pub settling_step: Option<usize>,
    pub median_ms: f64,
    pub max_ms: f64,
    pub total_nodes: usize,
    /// Terminal rows only: smallest feasible horizon from the scan.
    pub n_star: Option<usize>,
}

impl ComparisonRow {
    pub fn from_summary(s: &RunSummary) -> Self {
        Self {
            label: s.label.clone(),
            variant: s.variant,
            horizon: s.horizon,
            completed: s.completed,
            infeasible_at: s.infeasible_at,
            settling_step: s.settling_step,
            median_ms: s.median_ms,
            max_ms: s.max_ms,
            total_nodes: s.total_nodes,
            n_star: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub scan: Option<TerminalScan>,
}

/// Runs every config and tabulates them. Terminal-equality configs also get
/// the horizon scan (run once, up to `scan_limit`).
pub fn compare_variants(configs: &[ExperimentConfig], scan_limit: usize) -> Result<Comparison> {
    if configs.len() < 2 {
        return Err(Error::Invalid("comparison needs at least two configs".into()));
    }
    let mut rows = Vec::new();
    let mut scan: Option<TerminalScan> = None;
    for c in configs {
        let run = run_benchmark(c)?;
        let mut row = ComparisonRow::from_summary(&run.summary);
        if c.variant == Variant::TerminalEquality {
            if scan.is_none() {
                scan = Some(terminal_scan(&c.params, &c.x0()?, scan_limit, &c.solver)?);
            }
            row.n_star = scan.as_ref().and_then(|s| s.n_star);
        }
        rows.push(row);
    }
    Ok(Comparison { rows, scan })
}

impl Comparison {
    pub fn to_markdown(&self) -> String {
        let opt = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
        let mut s = String::from(
            "| run | completed | infeasible at | settling step | median ms | max ms | nodes | N* |\n\
             |---|---|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "| {} | {} | {} | {} | {:.3} | {:.3} | {} | {} |\n",
                r.label,
                r.completed,
                opt(r.infeasible_at),
                opt(r.settling_step),
                r.median_ms,
                r.max_ms,
                r.total_nodes,
                opt(r.n_star),
            ));
        }
        if let Some(d) = self.scan.as_ref().and_then(|s| s.diagnostic.as_ref()) {
            s.push_str(&format!("\nterminal scan: {d}\n"));
        }
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "run",
            "variant",
            "N",
            "completed",
            "infeasible_at",
            "settling_step",
            "median_ms",
            "max_ms",
            "nodes",
            "n_star",
        ])?;
        let opt = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                r.variant.name().to_string(),
                r.horizon.to_string(),
                r.completed.to_string(),
                opt(r.infeasible_at),
                opt(r.settling_step),
                r.median_ms.to_string(),
                r.max_ms.to_string(),
                r.total_nodes.to_string(),
                opt(r.n_star),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_settling() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let xs: Vec<Vector> = [1.0, 1e-4, 0.5, 1e-4, 0.0]
            .iter()
            .map(|&v| Vector::from_element(2, v))
            .collect();
        assert_eq!(settling_step(&xs, 1e-3), Some(3));
        assert_eq!(settling_step(&xs[..3], 1e-3), None);
    }

    #[test]
    fn zero_start_gives_zero_log() {
        let mut c = ExperimentConfig::new(SuspensionParams::default(), Variant::TerminalEquality)
            .with_horizon(2);
        c.x0 = vec![0.0; 4];
        c.steps = 5;
        let run = run_benchmark(&c).unwrap();
        assert!(run.log.completed());
        assert!(run.log.states().iter().all(|x| x.amax() < 1e-9));
        assert_eq!(run.summary.settling_step, Some(0));
    }

    #[test]
    fn config_json_roundtrip_and_defaults() {
        let c = ExperimentConfig::from_json(r#"{"variant": "lyapunov-optimal"}"#).unwrap();
        assert_eq!(c.x0, vec![0.0, 0.0, 0.1, 0.0]);
        assert_eq!(c.steps, 600);
        assert_eq!(c.params, SuspensionParams::default());
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let s = r#"{"variant": "terminal", "y_source": {"kind": "synthesized", "gain": 1.0}}"#;
        let c = ExperimentConfig::from_json(s).unwrap();
        assert!(matches!(c.y_source, YSource::Synthesized { max_iters: 400, .. }));
    }
}
