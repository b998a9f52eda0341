use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde_json::{json, Value};
use tempfile::TempDir;

const TELEMA: [[f64; 3]; 3] = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn simplexdyn(cmd: &str, config: &Path, out: &Path) -> Run {
    let o = Command::new(env!("CARGO_BIN_EXE_simplexdyn"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    Run {
        code: o.status.code().expect("exited"),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

fn config(dir: &TempDir, name: &str, value: &Value) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn shifted_telema(c: f64) -> Value {
    let rows: Vec<Vec<f64>> =
        TELEMA.iter().enumerate().map(|(i, r)| r.iter().enumerate().map(|(j, v)| v - if i == j { c } else { 0.0 }).collect()).collect();
    json!(rows)
}

fn assert_close(v: &Value, expected: &[f64], tol: f64) {
    let got: Vec<f64> = v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(expected) {
        assert!((g - e).abs() < tol, "{got:?} vs {expected:?}");
    }
}

#[test]
fn telema_has_ess_at_the_third_vertex_and_lambda_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("telema.json"), json!({"n": 3, "A": TELEMA}).to_string()).unwrap();
    let cfg = config(&dir, "analyze.json", &json!({"seed": 1, "A": "telema.json"}));
    let run = simplexdyn("matrix-analyze", &cfg, dir.path());
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = read_json(dir.path().join("matrix_report.json"));
    assert_close(&report["report"]["equilibria"]["ess"]["point"], &[0.0, 0.0, 1.0], 1e-12);
    assert_eq!(report["report"]["decomposition"]["lambda"].as_f64().unwrap().abs(), 0.0);
    assert_eq!(report["provenance"]["seed"], 1);
    assert_eq!(report["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn shifted_telema_has_the_closed_form_interior_ne() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "analyze.json", &json!({"seed": 1, "A": shifted_telema(10.0)}));
    let run = simplexdyn("matrix-analyze", &cfg, dir.path());
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = read_json(dir.path().join("matrix_report.json"));
    assert_close(&report["report"]["equilibria"]["interior_ne"], &[1.0 / 30.0, 1.0 / 3.0, 19.0 / 30.0], 1e-12);
    assert_eq!(report["monotonicity_probe"]["outcome"], "monotone-on-samples");
}

#[test]
fn malformed_json_exits_2_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\"seed\": 1, \"A\": [[1, 2], [3, 4]").unwrap();
    let run = simplexdyn("matrix-analyze", &cfg, dir.path());
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("invalid configuration"), "{}", run.stderr);
}

#[test]
fn missing_seed_and_missing_files_are_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let no_seed = config(&dir, "a.json", &json!({"A": TELEMA}));
    assert_eq!(simplexdyn("matrix-analyze", &no_seed, dir.path()).code, 2);
    let no_file = config(&dir, "b.json", &json!({"seed": 1, "A": "absent.json"}));
    assert_eq!(simplexdyn("matrix-analyze", &no_file, dir.path()).code, 2);
    let sim = config(&dir, "c.json", &json!({"kind": "bm", "p0": [0.2, 0.3, 0.5], "sigma": 1.0, "t_end": 1.0, "dt": 0.01}));
    assert_eq!(simplexdyn("simulate", &sim, dir.path()).code, 2);
}

#[test]
fn ragged_matrix_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "analyze.json", &json!({"seed": 1, "A": [[1.0, 2.0], [3.0]]}));
    let run = simplexdyn("matrix-analyze", &cfg, dir.path());
    assert_eq!(run.code, 3, "{}", run.stderr);
    let mismatch = config(
        &dir,
        "sde.json",
        &json!({"kind": "sde", "seed": 3, "drift": {"kind": "replicator", "A": TELEMA}, "p0": [0.25, 0.25, 0.25, 0.25],
                "sigma": 1.0, "t_end": 0.1, "dt": 0.01}),
    );
    assert_eq!(simplexdyn("simulate", &mismatch, dir.path()).code, 3);
}

#[test]
fn ode_run_of_shifted_telema_reaches_the_ess() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        &dir,
        "ode.json",
        &json!({"kind": "ode", "seed": 0, "A": shifted_telema(10.0), "p0": [1.0/3.0, 1.0/3.0, 1.0/3.0],
                "t_end": 50.0, "dt": 0.01, "record_every": 100}),
    );
    let run = simplexdyn("simulate", &cfg, dir.path());
    assert_eq!(run.code, 0, "{}", run.stderr);
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    let ne = [1.0 / 30.0, 1.0 / 3.0, 19.0 / 30.0];
    assert!(last[1..4].iter().zip(&ne).all(|(a, b)| (a - b).abs() < 1e-6), "{last:?}");
    let sidecar = read_json(dir.path().join("trajectory.json"));
    assert_eq!(sidecar["rows"], 51);
    assert_eq!(sidecar["provenance"]["config"]["kind"], "ode");
    assert!(sidecar["provenance"]["version"].as_str().unwrap().starts_with('v'));
}

#[test]
fn sde_runs_with_the_same_seed_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        &dir,
        "sde.json",
        &json!({"kind": "sde", "seed": 42, "drift": {"kind": "replicator", "A": shifted_telema(3.0)},
                "p0": [0.5, 0.3, 0.2], "sigma": 1.0, "t_end": 1.0, "dt": 0.001, "record_every": 10}),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(simplexdyn("simulate", &cfg, &a).code, 0);
    assert_eq!(simplexdyn("simulate", &cfg, &b).code, 0);
    for f in ["trajectory.csv", "trajectory.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let other = config(
        &dir,
        "sde2.json",
        &json!({"kind": "sde", "seed": 43, "drift": {"kind": "replicator", "A": shifted_telema(3.0)},
                "p0": [0.5, 0.3, 0.2], "sigma": 1.0, "t_end": 1.0, "dt": 0.001, "record_every": 10}),
    );
    let c = dir.path().join("c");
    assert_eq!(simplexdyn("simulate", &other, &c).code, 0);
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(c.join("trajectory.csv")).unwrap());
}

#[test]
fn bm_csv_parses_back_to_compositions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "bm.json", &json!({"kind": "bm", "seed": 5, "p0": [0.2, 0.3, 0.5], "sigma": 1.0, "t_end": 1.0, "dt": 0.01}));
    assert_eq!(simplexdyn("simulate", &cfg, dir.path()).code, 0);
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,p_1,p_2,p_3,ilr_1,ilr_2");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101);
    assert!((rows.last().unwrap()[0] - 1.0).abs() < 1e-12);
    for r in &rows {
        let p = simplexdyn::Composition::new(r[1..4].to_vec()).expect("valid composition");
        let x = simplexdyn::aitchison::ilr(&p).unwrap();
        assert!((x.0[0] - r[4]).abs() < 1e-9 && (x.0[1] - r[5]).abs() < 1e-9);
    }
}

#[test]
fn other_simulation_kinds_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("ensemble", json!({"kind": "ensemble", "seed": 1, "drift": {"kind": "none"}, "initial": {"dirichlet": [1.0, 1.0, 1.0]},
                            "sigma": 1.0, "t_end": 0.1, "dt": 0.01, "paths": 50}), "ensemble.csv", 50),
        ("wz-path", json!({"kind": "wong-zakai", "seed": 1, "lambda_corr": 0.3, "p0": [0.2, 0.3, 0.5], "t_end": 0.5, "dt": 0.005}), "trajectory.csv", 101),
        ("wz-ensemble", json!({"kind": "wong-zakai", "seed": 1, "lambda_corr": 0.3, "p0": [0.2, 0.3, 0.5], "t_end": 0.5, "dt": 0.005, "paths": 20}), "ensemble.csv", 20),
        ("walk", json!({"kind": "walk", "seed": 1, "p0": [0.2, 0.3, 0.5], "n_steps": 16, "t_end": 1.0, "grid_points": 11}), "trajectory.csv", 11),
        ("jko", json!({"kind": "jko", "seed": 1, "mean": 0.0, "sd": 1.0, "levels": 200, "t_end": 0.5, "n_steps": 5}), "jko.csv", 6),
        ("portrait", json!({"kind": "portrait", "seed": 1, "A": TELEMA, "grid": 10}), "portrait.csv", 36),
    ];
    for (name, value, file, rows) in cases {
        let out = dir.path().join(name);
        let run = simplexdyn("simulate", &config(&dir, &format!("{name}.json"), &value), &out);
        assert_eq!(run.code, 0, "{name}: {}", run.stderr);
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(text.lines().count() - 1, rows, "{name}");
    }
}

#[test]
fn simulation_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    // dt does not resolve the correlation time λ²/10 = 0.001.
    let cfg = config(
        &dir,
        "wz.json",
        &json!({"kind": "wong-zakai", "seed": 1, "lambda_corr": 0.1, "p0": [0.2, 0.3, 0.5], "t_end": 1.0, "dt": 0.01}),
    );
    let run = simplexdyn("simulate", &cfg, dir.path());
    assert_eq!(run.code, 4, "{}", run.stderr);
    assert!(run.stderr.contains("simulation failed"));
}

#[test]
fn verify_geometry_passes_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "verify.json", &json!({"suite": "geometry", "seed": 7}));
    let started = Instant::now();
    let run = simplexdyn("verify", &cfg, dir.path());
    assert!(started.elapsed().as_secs_f64() < 10.0);
    assert_eq!(run.code, 0, "{}{}", run.stdout, run.stderr);
    assert!(run.stdout.lines().any(|l| l.starts_with("PASS cross-oracle")));
    let report = read_json(dir.path().join("verify_geometry.json"));
    assert_eq!(report["report"]["pass"], true);
    assert_eq!(report["provenance"]["seed"], 7);
}

#[test]
fn verify_contraction_with_rps_passes_as_a_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let rps = json!([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]]);
    let cfg = config(&dir, "verify.json", &json!({"suite": "contraction", "seed": 7, "A": rps}));
    let run = simplexdyn("verify", &cfg, dir.path());
    assert_eq!(run.code, 0, "{}{}", run.stdout, run.stderr);
    let report = read_json(dir.path().join("verify_contraction.json"));
    let gates = report["report"]["gates"].as_array().unwrap();
    assert_eq!(gates.len(), 1);
    assert!(gates[0]["name"].as_str().unwrap().contains("negative control"));
}

#[test]
fn verify_dirichlet_with_a_custom_game_reports_consistently() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        &dir,
        "verify.json",
        &json!({"suite": "dirichlet", "seed": 7, "A": [[-3.0, 0.0, 0.0], [0.0, -3.0, 0.0], [0.0, 0.0, -3.0]],
                "alpha": [1.0, 1.0, 1.0], "paths": 2000}),
    );
    let run = simplexdyn("verify", &cfg, dir.path());
    let report = read_json(dir.path().join("verify_dirichlet.json"));
    let pass = report["report"]["pass"].as_bool().unwrap();
    assert_eq!(run.code, if pass { 0 } else { 5 });
    let residual = &report["report"]["gates"][0];
    assert!(residual["name"].as_str().unwrap().contains("residual"));
    assert_eq!(residual["pass"], true);
}

#[test]
fn failing_gates_exit_5_and_are_named() {
    let dir = tempfile::tempdir().unwrap();
    // The default contraction suite carries a control that cannot produce a
    // witness, so it fails.
    let cfg = config(&dir, "verify.json", &json!({"suite": "contraction", "seed": 7}));
    let run = simplexdyn("verify", &cfg, dir.path());
    assert_eq!(run.code, 5);
    assert!(run.stderr.contains("failed gates:"), "{}", run.stderr);
    assert!(run.stdout.lines().any(|l| l.starts_with("FAIL ")));
}

#[test]
fn verify_rejects_unknown_suites_and_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir, "v1.json", &json!({"suite": "nope", "seed": 7}));
    assert_eq!(simplexdyn("verify", &cfg, dir.path()).code, 2);
    let cfg = config(&dir, "v2.json", &json!({"suite": "geometry", "seed": 7, "colour": 1}));
    assert_eq!(simplexdyn("verify", &cfg, dir.path()).code, 2);
}

#[test]
fn ternary_svg_is_deterministic_and_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let sim = config(&dir, "bm.json", &json!({"kind": "bm", "seed": 5, "p0": [1.0/3.0, 1.0/3.0, 1.0/3.0], "sigma": 1.0, "t_end": 1.0, "dt": 0.01}));
    assert_eq!(simplexdyn("simulate", &sim, dir.path()).code, 0);
    let plot = config(&dir, "plot.json", &json!({"input": "trajectory.csv"}));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(simplexdyn("ternary", &plot, &a).code, 0);
    assert_eq!(simplexdyn("ternary", &plot, &b).code, 0);
    let svg = fs::read_to_string(a.join("trajectory.svg")).unwrap();
    assert_eq!(svg.as_bytes(), fs::read(b.join("trajectory.svg")).unwrap().as_slice());
    assert!(svg.starts_with(r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="693""#));
    assert!(svg.contains("<polyline"));
    assert!(svg.contains(r#""seed":5"#));
    // The path starts at the barycenter, drawn at the centroid of the frame.
    assert!(svg.contains(r#"<polyline points="400.000,456.197 "#), "{svg}");
    assert!(svg.contains(r#"<polygon points="20.000,675.590 780.000,675.590 400.000,17.410""#));
}

#[test]
fn ternary_draws_portrait_arrows() {
    let dir = tempfile::tempdir().unwrap();
    let sim = config(&dir, "p.json", &json!({"kind": "portrait", "seed": 0, "A": shifted_telema(10.0), "grid": 8}));
    assert_eq!(simplexdyn("simulate", &sim, dir.path()).code, 0);
    let plot = config(&dir, "plot.json", &json!({"input": "portrait.csv"}));
    assert_eq!(simplexdyn("ternary", &plot, dir.path()).code, 0);
    let svg = fs::read_to_string(dir.path().join("portrait.svg")).unwrap();
    assert_eq!(svg.matches("marker-end").count(), 21);
}

#[test]
fn ternary_rejects_four_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let sim = config(&dir, "bm.json", &json!({"kind": "bm", "seed": 5, "p0": [0.25, 0.25, 0.25, 0.25], "sigma": 1.0, "t_end": 0.1, "dt": 0.01}));
    assert_eq!(simplexdyn("simulate", &sim, dir.path()).code, 0);
    let plot = config(&dir, "plot.json", &json!({"input": "trajectory.csv"}));
    let run = simplexdyn("ternary", &plot, dir.path());
    assert_eq!(run.code, 3, "{}", run.stderr);
}
