//! End-to-end runs of the binary: the construction chain on hand-checked
//! inputs, the exit-code contract, and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_irrev"));
    cmd.env_remove("IRREV_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    let text = fs::read_to_string(path).expect("artifact exists");
    serde_json::from_str(&text).expect("artifact parses")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .expect("array")
        .iter()
        .map(|x| x.as_f64().expect("number"))
        .collect()
}

fn assert_close(have: &[f64], want: &[f64], tol: f64) {
    assert_eq!(have.len(), want.len(), "{have:?} vs {want:?}");
    for (a, b) in have.iter().zip(want) {
        assert!((a - b).abs() <= tol, "{have:?} vs {want:?}");
    }
}

fn write_ou_density(dir: &Path) -> String {
    let path = dir.join("density.json");
    fs::write(&path, "{\"num\":[2],\"den\":[1,0,-1]}\n").unwrap();
    path.display().to_string()
}

#[test]
fn ou_pipeline_matches_the_hand_computed_chain() {
    let dir = tempfile::tempdir().unwrap();
    let density = write_ou_density(dir.path());
    let out_dir = dir.path().join("run");
    run_ok(&["pipeline", "--input", &density, "--out-dir", out_dir.to_str().unwrap()]);

    let factor = read_json(&out_dir.join("factor.json"));
    let analytic_den = floats(&factor["analytic"]["den"]);
    assert_close(&analytic_den, &[1.0, 1.0], 1e-12);
    let gain = floats(&factor["analytic"]["num"])[0];
    assert!((gain * gain - 2.0).abs() <= 1e-12);

    let structural = read_json(&out_dir.join("structural.json"));
    assert_close(&floats(&structural["k"]["tf"]["num"]), &[-1.0, 1.0], 1e-12);
    assert_close(&floats(&structural["k"]["tf"]["den"]), &[1.0, 1.0], 1e-12);

    let lossless = read_json(&out_dir.join("lossless.json"));
    assert_close(&floats(&lossless["z0"]["num"]), &[1.0], 1e-12);
    assert_close(&floats(&lossless["z0"]["den"]), &[0.0, 1.0], 1e-12);

    let foster = read_json(&out_dir.join("foster.json"));
    assert!((foster["foster"]["k_0"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
    assert_eq!(foster["foster"]["k_inf"].as_f64().unwrap(), 0.0);
    assert!(foster["foster"]["pairs"].as_array().unwrap().is_empty());
    assert_eq!(foster["verification"]["pass"], Value::Bool(true));
}

#[test]
fn second_order_pipeline_extracts_one_lc_pair() {
    let dir = tempfile::tempdir().unwrap();
    let density = dir.path().join("density.json");
    fs::write(&density, "{\"num\":[1],\"den\":[1,0,1,0,1]}\n").unwrap();
    let out_dir = dir.path().join("run");
    run_ok(&[
        "pipeline",
        "--input",
        density.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);

    let structural = read_json(&out_dir.join("structural.json"));
    assert_close(&floats(&structural["k"]["tf"]["den"]), &[1.0, 1.0, 1.0], 1e-12);
    assert_close(&floats(&structural["k"]["tf"]["num"]), &[1.0, -1.0, 1.0], 1e-12);

    let lossless = read_json(&out_dir.join("lossless.json"));
    assert_close(&floats(&lossless["z0"]["num"]), &[0.0, 1.0], 1e-12);
    assert_close(&floats(&lossless["z0"]["den"]), &[1.0, 0.0, 1.0], 1e-12);

    let foster = read_json(&out_dir.join("foster.json"));
    assert_eq!(foster["foster"]["k_inf"].as_f64().unwrap(), 0.0);
    assert_eq!(foster["foster"]["k_0"].as_f64().unwrap(), 0.0);
    let pairs = foster["foster"]["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 1);
    let pair = floats(&pairs[0]);
    assert_close(&pair, &[0.5, 1.0], 1e-9);
}

#[test]
fn staged_runs_write_the_same_artifacts_as_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let density = write_ou_density(dir.path());
    let piped = dir.path().join("piped");
    run_ok(&["pipeline", "--input", &density, "--out-dir", piped.to_str().unwrap()]);

    let staged = dir.path().join("staged");
    let staged_str = staged.to_str().unwrap();
    let stage_input = |file: &str| staged.join(file).display().to_string();
    run_ok(&["factorize", "--input", &density, "--out-dir", staged_str]);
    run_ok(&["realize", "--input", &stage_input("factor.json"), "--out-dir", staged_str]);
    run_ok(&["backward", "--input", &stage_input("model.json"), "--out-dir", staged_str]);
    run_ok(&["structural", "--input", &stage_input("pair.json"), "--out-dir", staged_str]);
    run_ok(&["lossless", "--input", &stage_input("structural.json"), "--out-dir", staged_str]);
    run_ok(&["foster", "--input", &stage_input("lossless.json"), "--out-dir", staged_str]);

    for file in [
        "factor.json",
        "model.json",
        "pair.json",
        "structural.json",
        "lossless.json",
        "foster.json",
    ] {
        let a = fs::read(piped.join(file)).unwrap();
        let b = fs::read(staged.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between pipeline and staged runs");
    }
}

#[test]
fn malformed_json_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"num\":[2],\"den\":[1,0,-1]").unwrap();
    let out = run(&[
        "factorize",
        "--input",
        bad.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn negative_density_exits_two_and_names_the_failed_check() {
    let dir = tempfile::tempdir().unwrap();
    let neg = dir.path().join("neg.json");
    fs::write(&neg, "{\"num\":[-1],\"den\":[1,0,-1]}").unwrap();
    let out = run(&[
        "factorize",
        "--input",
        neg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("real-nonnegative-on-axis"),
        "stderr does not name the failed check: {stderr}"
    );
}

#[test]
fn missing_upstream_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "realize",
        "--input",
        dir.path().join("absent.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

fn ou_pair_artifact(dir: &Path) -> String {
    let density = write_ou_density(dir);
    let out_dir = dir.join("chain");
    run_ok(&["pipeline", "--input", &density, "--out-dir", out_dir.to_str().unwrap()]);
    out_dir.join("pair.json").display().to_string()
}

#[test]
fn simulate_runs_with_one_seed_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let pair = ou_pair_artifact(dir.path());
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    for out_dir in [&first, &second] {
        run_ok(&[
            "simulate",
            "--input",
            &pair,
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--steps",
            "20000",
            "--seed",
            "7",
        ]);
    }
    let a = fs::read(first.join("path.csv")).unwrap();
    let b = fs::read(second.join("path.csv")).unwrap();
    assert_eq!(a, b);

    let header = String::from_utf8_lossy(&a);
    assert!(header.starts_with("t,y_1,x_1\n"));
}

#[test]
fn irrev_seed_env_var_matches_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let pair = ou_pair_artifact(dir.path());
    let flagged = dir.path().join("flagged");
    let env_dir = dir.path().join("env");
    run_ok(&[
        "simulate",
        "--input",
        &pair,
        "--out-dir",
        flagged.to_str().unwrap(),
        "--steps",
        "5000",
        "--seed",
        "99",
    ]);
    let out = bin()
        .env("IRREV_SEED", "99")
        .args([
            "simulate",
            "--input",
            &pair,
            "--out-dir",
            env_dir.to_str().unwrap(),
            "--steps",
            "5000",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(flagged.join("path.csv")).unwrap(),
        fs::read(env_dir.join("path.csv")).unwrap()
    );

    let manifest = read_json(&env_dir.join("manifest.json"));
    assert_eq!(manifest["seed"].as_u64(), Some(99));
}

#[test]
fn manifest_rerun_reproduces_the_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let pair = ou_pair_artifact(dir.path());
    let first = dir.path().join("first");
    run_ok(&[
        "simulate",
        "--input",
        &pair,
        "--out-dir",
        first.to_str().unwrap(),
        "--steps",
        "20000",
        "--dt",
        "0.02",
    ]);

    let manifest = read_json(&first.join("manifest.json"));
    let replay = dir.path().join("replay");
    run_ok(&[
        "simulate",
        "--input",
        manifest["input"].as_str().unwrap(),
        "--out-dir",
        replay.to_str().unwrap(),
        "--dt",
        &manifest["dt"].to_string(),
        "--steps",
        &manifest["steps"].to_string(),
        "--seed",
        &manifest["seed"].to_string(),
    ]);
    assert_eq!(
        fs::read(first.join("path.csv")).unwrap(),
        fs::read(replay.join("path.csv")).unwrap()
    );
}

#[test]
fn bathsim_reports_the_closed_loop_and_writes_a_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let density = write_ou_density(dir.path());
    let chain = dir.path().join("chain");
    run_ok(&["pipeline", "--input", &density, "--out-dir", chain.to_str().unwrap()]);

    let bath = dir.path().join("bath");
    run_ok(&[
        "bathsim",
        "--input",
        chain.join("lossless.json").to_str().unwrap(),
        "--out-dir",
        bath.to_str().unwrap(),
        "--steps",
        "20000",
        "--seed",
        "3",
    ]);

    let psd = fs::read_to_string(bath.join("bath_psd.csv")).unwrap();
    assert!(psd.starts_with("lambda,value\n"));
    assert!(psd.lines().count() > 100);

    let report = read_json(&bath.join("bath_report.json"));
    let eigs = report["closed_loop_eigenvalues"].as_array().unwrap();
    assert_eq!(eigs.len(), 1);
    let eig = floats(&eigs[0]);
    assert_close(&eig, &[-1.0, 0.0], 1e-9);
    assert!(report["energy_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn estimate_reports_the_error_against_a_reference_density() {
    let dir = tempfile::tempdir().unwrap();
    let pair = ou_pair_artifact(dir.path());
    let sim = dir.path().join("sim");
    run_ok(&[
        "simulate",
        "--input",
        &pair,
        "--out-dir",
        sim.to_str().unwrap(),
        "--steps",
        "60000",
        "--seed",
        "5",
    ]);

    let est = dir.path().join("est");
    run_ok(&[
        "estimate",
        "--input",
        sim.join("path.csv").to_str().unwrap(),
        "--out-dir",
        est.to_str().unwrap(),
        "--reference",
        dir.path().join("density.json").to_str().unwrap(),
    ]);

    let psd = fs::read_to_string(est.join("psd.csv")).unwrap();
    assert!(psd.starts_with("lambda,value\n"));
    let meta = read_json(&est.join("psd_meta.json"));
    assert_eq!(meta["window"].as_str(), Some("hann"));
    let err = meta["error_vs_reference"].as_f64().unwrap();
    assert!(err < 0.5, "estimate strayed {err} from the analytic density");
}

#[test]
fn verify_quick_passes_and_prints_one_line_per_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&["verify", "--quick", "--out-dir", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let pass_lines = stdout.lines().filter(|l| l.starts_with("PASS")).count();
    assert_eq!(pass_lines, 11);
    assert!(!stdout.contains("FAIL"));

    let summary = read_json(&dir.path().join("verification.json"));
    assert_eq!(summary["quick"], Value::Bool(true));
    assert_eq!(summary["results"].as_array().unwrap().len(), 11);
}
