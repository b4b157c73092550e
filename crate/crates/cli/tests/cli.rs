use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sobolev-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SOBOLEV_LAB_OUTPUT_DIR")
        .output()
        .expect("spawn")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = lab(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn field(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn graph_geometry_and_calculus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-graph", "--spec", "cycle(8)", "--out", "c8.json"], d);
    let report = json(&ok(&["geom-report", "--manifold", "c8.json", "--d", "1"], d));
    assert_eq!(report["doubling_constant"].as_f64(), Some(3.0));

    ok(&["gen-graph", "--spec", "path(2)", "--out", "p2.json"], d);
    std::fs::write(d.join("f.csv"), "vertex_id,value_re\n0,1\n1,0\n").unwrap();
    let t = format!("heat:{}", std::f64::consts::LN_2 / 2.0);
    ok(&["apply", "--manifold", "p2.json", "--symbol", &t, "--field", "f.csv", "--out", "h.csv"], d);
    let h = field(&d.join("h.csv"));
    assert!((h[0] - 0.75).abs() < 1e-12 && (h[1] - 0.25).abs() < 1e-12);

    let n = json(&ok(
        &["norm", "--manifold", "p2.json", "--kind", "sobolev", "--alpha", "1", "--homogeneous", "--field", "f.csv"],
        d,
    ));
    assert!((n["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let b = json(&ok(&["norm", "--manifold", "p2.json", "--kind", "bmo", "--field", "f.csv"], d));
    assert!((b["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    ok(&["sfunc", "--manifold", "p2.json", "--field", "f.csv", "--out", "s.csv"], d);
    assert!((field(&d.join("s.csv"))[0] - 0.5).abs() < 1e-12);

    ok(&["apply", "--manifold", "p2.json", "--symbol", "schrodinger:0.7", "--field", "f.csv", "--out", "u.csv"], d);
    let header = std::fs::read_to_string(d.join("u.csv")).unwrap();
    assert!(header.starts_with("vertex_id,value_re,value_im\n"));
}

#[test]
fn operator_cache_is_reused_and_invalidated() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-graph", "--spec", "cycle(6)", "--out", "m.json"], d);
    let a = ok(&["spectrum", "--manifold", "m.json", "--cache", "op.json"], d);
    assert!(d.join("op.json").exists());
    assert_eq!(a, ok(&["spectrum", "--manifold", "m.json", "--cache", "op.json"], d));
    ok(&["gen-graph", "--spec", "path(6)", "--out", "m.json"], d);
    let b = ok(&["spectrum", "--manifold", "m.json", "--cache", "op.json"], d);
    assert_ne!(json(&a)["eigenvalues"], json(&b)["eigenvalues"]);
}

#[test]
fn paraproducts_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-graph", "--spec", "cycle(12)", "--out", "m.json"], d);
    let f: String = (0..12).map(|i| format!("{i},{}\n", (i as f64).sin())).collect();
    let g: String = (0..12).map(|i| format!("{i},{}\n", (0.5 * i as f64).cos())).collect();
    std::fs::write(d.join("f.csv"), format!("vertex_id,value_re\n{f}")).unwrap();
    std::fs::write(d.join("g.csv"), format!("vertex_id,value_re\n{g}")).unwrap();
    ok(&["paraproduct", "--manifold", "m.json", "--flavor", "hh", "--f", "f.csv", "--g", "g.csv", "--out", "p.csv"], d);
    assert_eq!(field(&d.join("p.csv")).len(), 12);
    let dec = json(&ok(&["decompose", "--manifold", "m.json", "--f", "f.csv", "--g", "g.csv"], d));
    assert!(dec["relative_residual"].as_f64().unwrap() < 1e-6);

    for args in [
        vec!["leibniz-report", "--manifold", "m.json", "--trials", "4", "--breakdown", "--nodes", "64"],
        vec!["embed-report", "--manifold", "m.json", "--trials", "4"],
        vec!["log-embed-report", "--manifold", "m.json", "--trials", "2", "--bmol", "2"],
        vec!["nonlin-report", "--manifold", "m.json", "--F", "u^2", "--trials", "3"],
    ] {
        let r = json(&ok(&args, d));
        assert!(r["per_trial"].as_array().is_some_and(|a| !a.is_empty()), "{args:?}");
    }
}

#[test]
fn pde_run_writes_trace_and_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-graph", "--spec", "cycle(16)", "--out", "m.json"], d);
    let u0: String = (0..16).map(|i| format!("{i},{}\n", 0.1 * (0.4 * i as f64).sin())).collect();
    std::fs::write(d.join("u0.csv"), format!("vertex_id,value_re\n{u0}")).unwrap();
    let summary = json(&ok(
        &["pde-run", "--manifold", "m.json", "--kind", "heat", "--F", "square", "--u0", "u0.csv", "--interval", "0.1", "--out-dir", "run"],
        d,
    ));
    assert_eq!(summary["converged"], Value::Bool(true));
    for name in ["trace.json", "conservation.json", "fixed_point.csv"] {
        assert!(d.join("run").join(name).exists(), "{name}");
    }
}

#[test]
fn experiments_are_reproducible_and_flat() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.toml"),
        "[run]\nexperiment = \"characterize\"\ntrials = 1\nseed = 7\noutput = \"out/char\"\n\n[ladder]\nsizes = [16]\n",
    )
    .unwrap();
    ok(&["run", "--config", "c.toml"], d);
    let first = std::fs::read(d.join("out/char.json")).unwrap();
    ok(&["run", "--config", "c.toml"], d);
    assert_eq!(first, std::fs::read(d.join("out/char.json")).unwrap());
    assert!(d.join("out/char.timing.json").exists());
    let report = json(std::str::from_utf8(&first).unwrap());
    assert_eq!(report["per_trial"].as_array().unwrap().len(), 1);
    assert!(report["input_hashes"]["config"].is_string());

    ok(&["leibniz", "--sizes", "16,32,64", "--trials", "5", "--output", "lz"], d);
    let csv = std::fs::read_to_string(d.join("lz.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("n,trials,max_ratio,min_ratio,median_ratio"));
}

#[test]
fn output_dir_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_sobolev-lab"))
        .args(["geom", "--sizes", "8", "--trials", "1", "--output", "nested/g"])
        .current_dir(d)
        .env("SOBOLEV_LAB_OUTPUT_DIR", d.join("elsewhere"))
        .env("SOBOLEV_LAB_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.join("elsewhere/g.json").exists());
    assert!(!d.join("nested").exists());
}

#[test]
fn hypothesis_violations_flag_but_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["characterize", "--sizes", "8", "--trials", "1", "--rho", "2", "--output", "v"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("hypothesis-violated"));
}

#[test]
fn hard_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "[run]\nexperiment = \"nope\"\n").unwrap();
    for args in [
        vec!["run", "--config", "bad.toml"],
        vec!["run", "--config", "missing.toml"],
        vec!["gen-graph", "--spec", "hexagon(3)", "--out", "x.json"],
        vec!["characterize", "--sizes", "", "--trials", "1"],
        vec!["nonlin", "--F", "exp", "--sizes", "8"],
    ] {
        assert_eq!(lab(&args, d).status.code(), Some(2), "{args:?}");
    }
}
