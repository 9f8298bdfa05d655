//! The binary's exit-code contract and output schemas.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rmsprop-lab"))
}

fn experiment(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("experiments").join(name)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const NOISELESS: &str = r#"
[problem]
kind = "quadratic"
eigenvalues = [0.5, 1.0, 2.0]

[schedule]
gamma = 1.0
lambda = 1.0
horizon = 1000

[run]
optimizer = "rmsprop"
record_every = 100
"#;

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_decimated_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), NOISELESS);
    let out = tmp.path().join("out");
    let o = bin().arg("run").arg(&cfg).arg("--out-dir").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 10);
    for name in ["summary.json", "f.dat", "g1.dat", "g2.dat", "ratio.dat", "plot.gp"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let g1 = std::fs::read_to_string(out.join("g1.dat")).unwrap();
    assert_eq!(g1.lines().count(), 10);
    assert!(g1.lines().all(|l| l.split_whitespace().count() == 2));
}

#[test]
fn short_horizon_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &NOISELESS.replace("horizon = 1000", "horizon = 5"));
    let o = bin().arg("run").arg(&cfg).arg("--out-dir").arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("T >= e^2/lambda"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &NOISELESS.replace("lambda = 1.0", "lambda = 1.0\neps = 1e-8"));
    let o = bin().arg("bound").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eps"));
}

#[test]
fn missing_config_is_a_config_error() {
    let o = bin().arg("run").arg("/nonexistent/exp.toml").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn diverging_run_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let body = NOISELESS.replace("gamma = 1.0", "gamma = 1e200");
    let cfg = write_config(tmp.path(), &body);
    let o = bin().arg("run").arg(&cfg).arg("--out-dir").arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("seed 0") && err.contains("iteration"), "{err}");
}

#[test]
fn bound_without_noise_has_zero_noise_term() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), NOISELESS);
    let o = bin().arg("bound").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["term_noise"], 0.0);
    assert_eq!(v["dominant"], "deterministic");
}

#[test]
fn bound_reports_balanced_gamma() {
    let o = bin().arg("bound").arg(experiment("quadratic_run.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    // f(x^1) - f* = (1/2) sum of eigenvalues 0.1..1 = 2.75, L = 1.
    let gamma = v["gamma"].as_f64().unwrap();
    assert!((gamma - 2.75f64.sqrt()).abs() <= 1e-15);
}

#[test]
fn verify_lemma1_counts() {
    let o = bin().args(["verify", "lemma1", "--n", "1000"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("lemma1: 1001/1001 pass"), "{}", stdout(&o));
}

#[test]
fn verify_equivalence_reports_deviation() {
    let o = bin()
        .args(["verify", "equivalence", "--theta", "0.9", "--steps", "10000"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("heavy_ball_form theta=0.9"), "{text}");
    assert!(!text.contains("theta=0.5"));
}

#[test]
fn verify_all_passes() {
    let o = bin().args(["verify", "all", "--jobs", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for suite in ["lemma1", "lemma2", "lemma6", "equivalence", "assumptions"] {
        assert!(stdout(&o).contains(&format!("{suite}: ")));
    }
}

#[test]
fn sweep_has_no_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("sweep")
        .arg(experiment("quadratic_sweep.toml"))
        .arg("--out-dir")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).contains("VIOLATION"));
    let slope: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("slope.json")).unwrap()).unwrap();
    assert_eq!(slope["violations"], Value::Array(vec![]));
    for name in ["sweep.csv", "empirical.dat", "bound.dat", "sgd_reference.dat", "plot.gp"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
}

#[test]
fn empty_sweep_grid_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let body = std::fs::read_to_string(experiment("quadratic_sweep.toml"))
        .unwrap()
        .replace("horizons = [256, 1024, 4096, 16384]", "horizons = []");
    let cfg = write_config(tmp.path(), &body);
    let o = bin().arg("sweep").arg(&cfg).arg("--out-dir").arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = bin()
            .arg("run")
            .arg(experiment("quadratic_run.toml"))
            .args(["--seed", seed, "--out-dir"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read(out.join("trajectory.csv")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
    assert_eq!(run("1", "a"), run("1", "c"));
}

#[test]
fn golden_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("run")
        .arg(experiment("quadratic_run.toml"))
        .arg("--out-dir")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let csv = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "k,f,g1,g2,ratio,v_min,v_max");

    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    let keys: Vec<&str> = summary.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        [
            "avg_g1", "avg_g2", "beta", "bound", "dim", "eta", "f_gap", "final_f", "horizon", "initial_f",
            "min_f", "optimizer", "ratio_max", "ratio_min", "seed", "sgd_reference", "sgd_step",
            "smoothness", "smoothness_certified", "theta"
        ]
    );
    let bound_keys: Vec<&str> = summary["bound"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        bound_keys,
        ["F", "active_branch", "branches", "dominant", "f_over_gamma", "gamma", "rhs", "term_det", "term_noise"]
    );
    assert_eq!(summary["bound"]["branches"].as_array().unwrap().len(), 5);

    let sweep_tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("sweep")
        .arg(experiment("quadratic_sweep.toml"))
        .arg("--out-dir")
        .arg(sweep_tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let sweep = std::fs::read_to_string(sweep_tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(
        sweep.lines().next().unwrap(),
        "T,mean_g1,se_g1,rhs,term_noise,term_det,sgd_reference,violation"
    );
    let slope: Value =
        serde_json::from_str(&std::fs::read_to_string(sweep_tmp.path().join("slope.json")).unwrap()).unwrap();
    let keys: Vec<&str> = slope.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["bound", "empirical", "sgd_reference", "skipped_horizons", "violations"]);
}
