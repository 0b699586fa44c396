use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dirac_vacuum::manifest::RunManifest;
use dirac_vacuum::output::SolutionRecord;

const SMALL: &str = "\
[grid]
box_side = 3.0
points_per_axis = 6
cutoff = 2.5

[density]
kind = \"gaussian\"
charge = 1.0
width = 0.5

[solver]
alpha = 0.1
mixing = 0.5
";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_diracvac"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn solve_writes_solution_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SMALL, &["solve"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rec = SolutionRecord::read(&dir.path().join("out/solution.json")).unwrap();
    let m = manifest(dir.path());
    assert_eq!(rec.manifest_hash, m.hash);
    assert_eq!(m.compute_hash(), m.hash);
    assert_eq!(m.subcommand, "solve");
    assert!(rec.charge.abs() < 1e-8);
    assert!(rec.energy.total >= rec.energy.lower_bound);
    assert!(rec.renormalization.is_some());
}

#[test]
fn zero_density_is_the_free_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &SMALL.replace("charge = 1.0", "charge = 0.0"),
        &["solve"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rec = SolutionRecord::read(&dir.path().join("out/solution.json")).unwrap();
    assert_eq!(rec.iterations, 1);
    assert_eq!(rec.energy.total, 0.0);
}

#[test]
fn sweep_table_has_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SMALL, &["sweep"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mu,q,energy,converged,iters"));
    assert_eq!(lines.count(), 11);
    assert_eq!(manifest(dir.path()).outputs, vec!["sweep.csv"]);
}

#[test]
fn renorm_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "[renorm]\ncutoffs = [1.0, 10.0]\nalpha = 0.1\n",
        &["renorm"],
    );
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        stdout.lines().next(),
        Some("Lambda,B_Lambda,alpha,alpha_ph,kappa")
    );
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.contains("1.0,0.04948495"));
}

#[test]
fn check_passes_on_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SMALL, &["check"]);
    assert!(
        out.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/check.json")).unwrap()).unwrap();
    assert!(v.to_string().contains("admissibility equivalence"));
}

#[test]
fn errors_are_structured_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &format!("{SMALL}mu = 1.5\n"), &["solve"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "invalid_parameter");

    let out = run(dir.path(), SMALL, &["solve", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");

    let narrow = SMALL.replace("width = 0.5", "width = 0.1");
    let out = run(dir.path(), &narrow, &["solve"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "refused");
}

#[test]
fn charge_target_outside_window_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SMALL, &["charge", "--target", "1000"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "outside_charge_window");
}
