use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use atomgate::protocols::ProtocolResult;
use atomgate::qlin::DensityMatrix;
use serde_json::Value;

fn atomgate(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atomgate"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("ATOMGATE_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("error is JSON")
}

fn load(dir: &Path, label: &str) -> ProtocolResult {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{label}.json"))).unwrap()).unwrap()
}

#[test]
fn bell_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = atomgate(&["bell"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    let f = summary["derived"]["bell.fidelity"]["value"]
        .as_f64()
        .unwrap();
    assert!((f - 0.78).abs() < 0.02, "{f}");
    let res = load(dir.path(), "bell");
    assert_eq!(res.value("bell.fidelity"), f);
    let rho = fs::read_to_string(dir.path().join("bell_rho_bell.csv")).unwrap();
    assert_eq!(rho.lines().next(), Some("row,col,re,im,abs"));
    assert_eq!(rho.lines().count(), 1 + 16);
    let settings = fs::read_to_string(dir.path().join("bell_settings.csv")).unwrap();
    assert_eq!(settings.lines().count(), 1 + 9 * 4);
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "ghz",
        "--mode",
        "monte-carlo",
        "--trials",
        "2000",
        "--seed",
        "11",
        "--set",
        "tomography.resamples=4",
    ];
    assert!(atomgate(&args, a.path()).status.success());
    assert!(atomgate(&args, b.path()).status.success());
    for name in ["ghz_settings.csv", "ghz_rho_ghz.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
    // only the recorded output directory differs
    let (mut ra, mut rb) = (load(a.path(), "ghz"), load(b.path(), "ghz"));
    ra.config.output_dir = rb.config.output_dir.clone();
    rb.config.output_dir = ra.config.output_dir.clone();
    assert_eq!(
        serde_json::to_string(&ra).unwrap(),
        serde_json::to_string(&rb).unwrap()
    );
}

#[test]
fn emitted_density_matrices_are_physical() {
    let dir = tempfile::tempdir().unwrap();
    assert!(atomgate(&["eraser"], dir.path()).status.success());
    let res = load(dir.path(), "eraser");
    assert_eq!(res.density_matrices.len(), 2);
    for rho in res.density_matrices.values() {
        assert!(DensityMatrix::from_matrix(rho.matrix().clone()).is_ok());
    }
}

#[test]
fn set_overrides_reach_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = atomgate(
        &[
            "bell",
            "--profile",
            "ideal",
            "--set",
            "imperfections.mode_overlap=0.8",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let f = load(dir.path(), "bell").value("bell.fidelity");
    assert!((f - (0.8 + 0.2 * 0.25)).abs() < 1e-10, "{f}");
}

#[test]
fn loss_budget_reports_calibration_values() {
    let dir = tempfile::tempdir().unwrap();
    assert!(atomgate(&["loss-budget"], dir.path()).status.success());
    let res = load(dir.path(), "loss-budget");
    let c = res.value("loss_coupled_model");
    let u = res.value("loss_uncoupled_model");
    assert!(u > 0.0 && u < c && c < 1.0, "{c} {u}");
    assert!(dir.path().join("loss-budget_loss_budget.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let text = atomgate::config::PAPER_PROFILE
        .lines()
        .filter(|l| !l.starts_with("seed"))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&cfg, text).unwrap();
    let o = atomgate(&["bell", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("seed"));

    let o = atomgate(
        &["bell", "--set", "imperfections.mode_overlap=1.5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["path"]
        .as_str()
        .unwrap()
        .contains("mode_overlap"));
}

#[test]
fn unknown_subcommand_fails_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = atomgate(&["teleport"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");
}

#[test]
fn starvation_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = atomgate(
        &[
            "bell",
            "--mode",
            "monte-carlo",
            "--trials",
            "200",
            "--set",
            "imperfections.loss_coupled=1.0",
            "--set",
            "imperfections.mode_overlap=1.0",
            "--set",
            "imperfections.loss_uncoupled=1.0",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(stderr_json(&o)["error"], "starvation");
}

#[test]
fn output_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_atomgate"))
        .args(["ramsey", "--no-csv"])
        .env("ATOMGATE_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("ramsey.json").exists());
    assert!(!dir.path().join("ramsey_ramsey_curve.csv").exists());
}
