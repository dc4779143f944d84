use std::path::Path;
use std::process::{Command, Output};

fn hmpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmpc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_lyapunov_preset_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = hmpc(&[
        "simulate", "--preset", "suspension", "--variant", "lyapunov-optimal", "--N", "5", "--T",
        "30", "--out", path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trajectory.csv", "control.csv", "times.csv", "summary.json", "plot.gp"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["decrease_all"], true);
    assert_eq!(summary["logged_steps"], 30);
}

#[test]
fn simulate_terminal_preset_fails_at_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = hmpc(&[
        "simulate", "--preset", "suspension", "--variant", "terminal", "--N", "5", "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let summary = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("infeasible at step 0"));
}

#[test]
fn simulate_from_zero_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = hmpc(&[
        "simulate", "--preset", "suspension", "--N", "2", "--x0=0,0,0,0", "--T", "5", "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        for i in 1..5 {
            assert!(rec[i].parse::<f64>().unwrap().abs() < 1e-9);
        }
    }
}

#[test]
fn simulate_from_model_and_controller_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let cert = dir.path().join("cert.json");
    assert_eq!(hmpc(&["build-model", "--out", path(&model)]).status.code(), Some(0));
    let out = hmpc(&[
        "synth-y", "--model", path(&model), "--method", "modal", "--feedback", "0,-0.07,0,0.07",
        "--out", path(&cert),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("theta"));
    let certificate: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let controller = serde_json::json!({
        "variant": "lyapunov-optimal",
        "N": 1,
        "Q1": 1.0,
        "Q4": 1.0,
        "certificate": certificate,
    });
    let spec = dir.path().join("controller.json");
    std::fs::write(&spec, controller.to_string()).unwrap();
    let run = dir.path().join("run");
    let out = hmpc(&[
        "simulate", "--model", path(&model), "--controller", path(&spec), "--x0=0,0,0.1,0", "--T",
        "20", "--out", path(&run),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_y_scalar_and_unstable() {
    let dir = tempfile::tempdir().unwrap();
    let stable = dir.path().join("stable.json");
    let model = |a: f64| {
        use hmpc_core::linalg::Mat;
        let one = |v: f64| Mat::from_element(1, 1, v);
        hmpc_core::MldModel::linear(one(a), one(1.0), one(1.0), one(0.0)).to_json()
    };
    std::fs::write(&stable, model(0.5)).unwrap();
    let cert = dir.path().join("cert.json");
    let out = hmpc(&["synth-y", "--model", path(&stable), "--gamma", "0.4", "--out", path(&cert)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(c["Y"], serde_json::json!([[1.0]]));

    let unstable = dir.path().join("unstable.json");
    std::fs::write(&unstable, model(1.5)).unwrap();
    let out = hmpc(&["synth-y", "--model", path(&unstable), "--out", path(&cert)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_miqp_toy_and_contradiction() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.json");
    std::fs::write(
        &toy,
        r#"{"H": [[1, 0], [0, 0]], "f": [-1.5, 0], "Phi": [[1, -1], [-1, 1]], "phi": [0, 0],
            "binary": [1], "constant": 1.125}"#,
    )
    .unwrap();
    let out = hmpc(&["solve-miqp", "--problem", path(&toy), "--oracle"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("\"J\": 0.125") && text.contains("agree: 1/1"), "{text}");

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"H": [[0, 0], [0, 0]], "f": [0, 0], "Phi": [[1, 1], [-1, -1]], "phi": [1, -1.5],
            "binary": [0, 1]}"#,
    )
    .unwrap();
    let out = hmpc(&["solve-miqp", "--problem", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("Infeasible"));
}

#[test]
fn solve_miqp_random_suite_agrees() {
    let out = hmpc(&["solve-miqp", "--random", "200", "--seed", "42", "--oracle"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("agree: 200/200"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(hmpc(&["simulate", "--out", "/nonexistent/x"]).status.code(), Some(2));
    assert_eq!(hmpc(&["solve-miqp"]).status.code(), Some(2));
    assert_eq!(hmpc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        hmpc(&["solve-miqp", "--problem", "/nonexistent.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn probe_region_labels_origin_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("region.csv");
    let out = hmpc(&[
        "probe-region", "--preset", "suspension", "--variant", "terminal", "--N", "5", "--out",
        path(&out_csv),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(&out_csv).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 81);
    let origin = rows
        .iter()
        .find(|r| (0..4).all(|i| r[i].parse::<f64>().unwrap() == 0.0))
        .unwrap();
    assert_eq!(&origin[5], "true");
    let corner = &rows[0];
    assert_eq!(&corner[5], "false");
}

#[test]
fn bench_compare_reports_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = hmpc(&[
        "bench", "--preset", "suspension", "--compare", "--T", "20", "--scan-limit", "8", "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("comparison.md")).unwrap();
    assert!(table.lines().filter(|l| l.starts_with("| ")).count() >= 5, "{table}");
    assert!(table.contains("terminal scan"));
    let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn fixed_runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = hmpc(&[
            "simulate", "--preset", "suspension", "--N", "1", "--T", "15", "--out", path(d.path()),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["trajectory.csv", "control.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}
