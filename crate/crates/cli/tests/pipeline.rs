use std::path::Path;
use std::process::Command;

use qcwave_cli::config::ExperimentConfig;
use qcwave_cli::runner::{run_experiment, RunStatus};
use sha2::{Digest, Sha256};

const QUICK: &str = r#"
scenario = "quick"

[grid]
dim = 1
n = [64]
bounds = [[-8.0, 8.0]]
boundary = "periodic"

[potential]
kind = "harmonic"
omega = 1.0

[initial]
kind = "gaussian"
x0 = [1.0]
sigma = 0.7

[evolver]
kind = "linear"

[time]
dt = 0.01
t_end = 0.2
snapshot_stride = 10
"#;

const DRIFT: &str = r#"
scenario = "drift"

[grid]
dim = 1
n = [128]
bounds = [[-8.0, 8.0]]
boundary = "periodic"

[potential]
kind = "free"

[initial]
kind = "gaussian"
x0 = [-2.0]
sigma = 1.0
p0 = [1.0]

[evolver]
kind = "classical"

[time]
dt = 0.01
t_end = 0.3
snapshot_stride = 10

[trajectories]
count = 16
seed = 3

[[probes]]
name = "indirect_momentum"
width = 0.5
t1 = 0.0
t2 = 0.3
cycles = 4
seed = 9
"#;

const FOCUS: &str = r#"
scenario = "focus"

[grid]
dim = 1
n = [256]
bounds = [[-20.0, 20.0]]
boundary = "periodic"

[potential]
kind = "free"

[initial]
kind = "gaussian"
x0 = [0.0]
sigma = 2.0
chirp = -1.0

[evolver]
kind = "classical"

[time]
dt = 0.005
t_end = 1.5
snapshot_stride = 20
"#;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text, "inline").unwrap()
}

fn sha256_hex(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    format!("{:x}", hasher.finalize())
}

#[test]
fn completed_run_writes_the_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(QUICK), Some(dir.path()), None).unwrap();
    assert_eq!(out.status, RunStatus::Completed);

    let diag = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert_eq!(
        diag.lines().next().unwrap(),
        "t,norm,energy,mean_x,mean_p,sigma_x,sigma_p,ehrenfest1,ehrenfest2,node_count,min_rho"
    );
    assert_eq!(diag.lines().count(), 4, "one row per snapshot plus header");

    let fields = std::fs::read_to_string(dir.path().join("fields_000000.csv")).unwrap();
    assert_eq!(fields.lines().next().unwrap(), "x,rho,R,S,Q,V");
    assert!(dir.path().join("fields_000002.csv").exists(), "snapshot stride 10 over 20 steps");

    let manifest: toml::Value =
        toml::from_str(&std::fs::read_to_string(&out.manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["status"].as_str(), Some("completed"));
    for file in manifest["files"].as_array().unwrap() {
        let name = file["name"].as_str().unwrap();
        let recorded = file["sha256"].as_str().unwrap();
        assert_eq!(recorded, sha256_hex(&dir.path().join(name)), "checksum of {name}");
    }
}

#[test]
fn caustic_stop_still_writes_a_valid_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(FOCUS), Some(dir.path()), None).unwrap();
    assert_eq!(out.status, RunStatus::Caustic);
    assert!(out.detail.as_deref().unwrap_or("").contains("t = "));

    let manifest: toml::Value =
        toml::from_str(&std::fs::read_to_string(&out.manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["status"].as_str(), Some("caustic"));
    assert!(dir.path().join("diagnostics.csv").exists(), "partial run is still recorded");
}

#[test]
fn fixed_seed_reruns_are_byte_identical() {
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&config(DRIFT), Some(da.path()), Some(7)).unwrap();
    run_experiment(&config(DRIFT), Some(db.path()), Some(7)).unwrap();

    let mut names: Vec<String> = std::fs::read_dir(da.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert!(names.contains(&"trajectories.csv".to_string()));
    assert!(names.contains(&"probes.csv".to_string()));
    for name in &names {
        let a = std::fs::read(da.path().join(name)).unwrap();
        let b = std::fs::read(db.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn the_seed_actually_reaches_the_samplers() {
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&config(DRIFT), Some(da.path()), Some(1)).unwrap();
    run_experiment(&config(DRIFT), Some(db.path()), Some(2)).unwrap();
    let a = std::fs::read(da.path().join("trajectories.csv")).unwrap();
    let b = std::fs::read(db.path().join("trajectories.csv")).unwrap();
    assert_ne!(a, b, "different seeds should draw different ensembles");
}

#[test]
fn binary_reports_presets_and_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_qcwave");

    let list = Command::new(exe).args(["presets", "list"]).output().unwrap();
    assert!(list.status.success());
    let stdout = String::from_utf8(list.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 12);
    assert!(stdout.contains("dispersion"));

    let missing = Command::new(exe).args(["run", "no-such-config.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "scenario = 3\n").unwrap();
    let parse = Command::new(exe).args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(parse.status.code(), Some(2));

    let out = dir.path().join("focus-out");
    let caustic = Command::new(exe)
        .args(["run", "focusing_caustic", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(caustic.status.code(), Some(3));
    assert!(out.join("manifest.toml").exists());
}

#[test]
fn sweep_runs_every_matching_config() {
    let exe = env!("CARGO_BIN_EXE_qcwave");
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let text = QUICK.replace("scenario = \"quick\"", &format!("scenario = \"{name}\""));
        std::fs::write(dir.path().join(format!("{name}.toml")), text).unwrap();
    }

    let pattern = format!("{}/*.toml", dir.path().display());
    let sweep = Command::new(exe).args(["sweep", &pattern]).output().unwrap();
    assert!(sweep.status.success(), "stderr: {}", String::from_utf8_lossy(&sweep.stderr));
    for name in ["a", "b"] {
        assert!(dir.path().join(format!("{name}.out/manifest.toml")).exists());
    }

    let none = Command::new(exe).args(["sweep", "/nonexistent/*.toml"]).output().unwrap();
    assert_eq!(none.status.code(), Some(2));
}
