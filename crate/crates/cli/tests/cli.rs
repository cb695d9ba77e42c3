use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn movm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_movm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = movm(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr carries one JSON object")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn manifest(prefix: &Path) -> Value {
    let mut p = prefix.as_os_str().to_owned();
    p.push(".manifest.json");
    serde_json::from_str(&fs::read_to_string(PathBuf::from(p)).unwrap()).unwrap()
}

fn file(prefix: &Path, suffix: &str) -> PathBuf {
    let mut p = prefix.as_os_str().to_owned();
    p.push(suffix);
    PathBuf::from(p)
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

#[test]
fn stability_chart_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chart");
    let o = out.to_str().unwrap();
    run_ok(&[
        "stability-chart",
        "--config",
        &cfg("reference_bando.json"),
        "--out",
        o,
        "--grid",
        "9",
    ]);
    let (header, rows) = read_csv(&file(&out, ".csv"));
    assert_eq!(
        header,
        ["a", "d_tilde", "tau_cr", "tau_noc", "sigma", "sc_bound"]
    );
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[8][0], "5");
    for r in &rows {
        let tau_cr: f64 = r[2].parse().unwrap();
        let tau_noc: f64 = r[3].parse().unwrap();
        assert!(0.0 < tau_noc && tau_noc < tau_cr);
    }
    let m = manifest(&out);
    assert_eq!(m["command"], "stability-chart");
    assert_eq!(m["config"]["a"], 1.2);
    for f in m["outputs"].as_array().unwrap() {
        assert!(fs::metadata(f.as_str().unwrap()).unwrap().len() > 0);
    }
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for p in [&a, &b] {
        run_ok(&[
            "roc-contour",
            "--config",
            &cfg("reference_bando.json"),
            "--out",
            p.to_str().unwrap(),
            "--grid",
            "4",
        ]);
    }
    assert_eq!(
        fs::read(file(&a, ".csv")).unwrap(),
        fs::read(file(&b, ".csv")).unwrap()
    );
}

#[test]
fn single_point_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one");
    run_ok(&[
        "stability-chart",
        "--config",
        &cfg("reference_bando.json"),
        "--out",
        out.to_str().unwrap(),
        "--grid",
        "1",
        "--a-range",
        "2,2",
    ]);
    assert_eq!(read_csv(&file(&out, ".csv")).1.len(), 1);
}

#[test]
fn roc_contour_edges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("roc");
    run_ok(&[
        "roc-contour",
        "--config",
        &cfg("reference_bando.json"),
        "--out",
        out.to_str().unwrap(),
        "--grid",
        "5",
    ]);
    let (header, rows) = read_csv(&file(&out, ".csv"));
    assert_eq!(header, ["a", "tau", "tau_cr", "sigma"]);
    assert_eq!(rows.len(), 25);
    let m = manifest(&out);
    let dt = m["details"]["d_tilde"].as_f64().unwrap();
    for slice in rows.chunks(5) {
        let a: f64 = slice[0][0].parse().unwrap();
        let sigma: Vec<f64> = slice.iter().map(|r| r[3].parse().unwrap()).collect();
        // τ = 0: slowest root of λ² + aλ + a d̃
        let disc = a * a - 4.0 * a * dt;
        let delay_free = if disc < 0.0 {
            a / 2.0
        } else {
            (a - disc.sqrt()) / 2.0
        };
        assert!((sigma[0] - delay_free).abs() < 1e-9 * delay_free);
        assert!(sigma[4].abs() < 1e-6);
    }
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    run_ok(&[
        "simulate",
        "--config",
        &cfg("hopf_onset.json"),
        "--out",
        out.to_str().unwrap(),
        "--horizon",
        "5",
        "--stride",
        "100",
    ]);
    let (header, rows) = read_csv(&file(&out, ".csv"));
    let expect = [
        "t", "v_1", "v_2", "v_3", "v_4", "y_1", "y_2", "y_3", "y_4", "leader_v",
    ];
    assert_eq!(header, expect);
    assert_eq!(rows.len(), 501);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[1][0], "0.01");
    let v3: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(v3.iter().any(|v| v.abs() > 0.1));
    let m = manifest(&out);
    assert_eq!(m["details"]["delay_steps"].as_array().unwrap().len(), 4);
    assert_eq!(m["flags"]["stride"], 100);
}

#[test]
fn equilibrium_start_with_constant_leader_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flat");
    run_ok(&[
        "simulate",
        "--config",
        &cfg("reference_bando.json"),
        "--out",
        out.to_str().unwrap(),
        "--horizon",
        "2",
    ]);
    let (_, rows) = read_csv(&file(&out, ".csv"));
    assert!(rows
        .iter()
        .all(|r| r[1] == "0" && r[2] == "2" && r[3] == "5"));
}

#[test]
fn hopf_at_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nf");
    run_ok(&[
        "hopf",
        "--config",
        &cfg("reference_bando.json"),
        "--out",
        out.to_str().unwrap(),
        "--at-boundary",
    ]);
    let nf: Value =
        serde_json::from_str(&fs::read_to_string(file(&out, ".json")).unwrap()).unwrap();
    assert!((nf["kappa_cr"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(nf["supercritical"], true);
    let re = nf["c1_0"]["re"].as_f64().unwrap();
    // serde_json parses floats to within an ulp
    assert!((nf["beta2"].as_f64().unwrap() - 2.0 * re).abs() < 1e-15 * re.abs());
    assert!(nf["assumptions"]["violations"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn hopf_bifurcation_configs_are_supercritical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["bando_bifurcation.json", "underwood_bifurcation.json"] {
        let out = dir.path().join(name);
        run_ok(&[
            "hopf",
            "--config",
            &cfg(name),
            "--out",
            out.to_str().unwrap(),
        ]);
        let nf: Value =
            serde_json::from_str(&fs::read_to_string(file(&out, ".json")).unwrap()).unwrap();
        assert!(nf["mu2"].as_f64().unwrap() > 0.0, "{name}");
        assert!((nf["kappa_cr"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn resonant_pairs_exit_with_assumption_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("resonant.json");
    fs::write(
        &path,
        r#"{"a": 1.2, "tau": {"relative_to": "tau_cr", "factors": [1.0, 1.0]},
            "ovf": {"family": "bando", "v0": null, "ym": 2.0, "y_tilde": 5.0},
            "y_star": 2.0, "x0_dot_eq": 5.0}"#,
    )
    .unwrap();
    let out = movm(&[
        "hopf",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "assumption");
    assert!(err["detail"]["min_delta_m"].as_f64().unwrap() < 1e-10);
}

#[test]
fn zero_delay_pair_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nodelay.json");
    fs::write(
        &path,
        r#"{"a": 1.2, "tau": [0.0],
            "ovf": {"family": "bando", "v0": null, "ym": 1.0, "y_tilde": 5.0},
            "y_star": 2.0, "x0_dot_eq": 5.0}"#,
    )
    .unwrap();
    let out = movm(&[
        "hopf",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "numeric");
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = out.to_str().unwrap();
    let missing = movm(&[
        "stability-chart",
        "--config",
        "/nonexistent.json",
        "--out",
        o,
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr_json(&missing)["error"], "config");

    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"a": 1.2, "tau": [0.2], "ovf": {"family": "bando"}, "x0_dot_eq": 5.0, "extra": 1}"#,
    )
    .unwrap();
    let bad = movm(&["simulate", "--config", path.to_str().unwrap(), "--out", o]);
    assert_eq!(bad.status.code(), Some(2));

    fs::write(
        &path,
        r#"{"a": -1, "tau": [0.2], "ovf": {"family": "bando", "v0": null, "ym": 1, "y_tilde": 5},
            "y_star": 2, "x0_dot_eq": 5}"#,
    )
    .unwrap();
    assert_eq!(
        movm(&["simulate", "--config", path.to_str().unwrap(), "--out", o])
            .status
            .code(),
        Some(2)
    );
    assert!(!file(&out, ".csv").exists());
}

#[test]
fn bifurcation_csv_has_status_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bif");
    run_ok(&[
        "bifurcation",
        "--config",
        &cfg("underwood_bifurcation.json"),
        "--out",
        out.to_str().unwrap(),
        "--kappa-list",
        "1.1",
        "--horizon",
        "400",
        "--ts",
        "1e-3",
        "--perturbation",
        "0.01",
    ]);
    let (header, rows) = read_csv(&file(&out, ".csv"));
    assert_eq!(
        header,
        ["kappa", "amplitude", "frequency", "horizon", "status"]
    );
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][4], "ok");
    let amp: f64 = rows[0][1].parse().unwrap();
    assert!(amp > 1.0, "{amp}");
    assert_eq!(manifest(&out)["details"]["vehicle"], 2);
}
