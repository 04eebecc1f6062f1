use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nlmc_cli::{cmd_run_fine, cmd_sweep, ExperimentConfig, Problem};
use tempfile::TempDir;

const FRACTURES: &str = "# two networks\n0.10 0.15 0.45 0.40\n0.60 0.85 0.90 0.55\n";

fn config_text(sources: bool) -> String {
    let mut text = String::from(
        r#"fractures = "fractures.txt"

[grid]
fine = [24, 24]
coarse = [[4, 4], [6, 6]]

[properties]
k1 = 0.5e-6
k2 = 1e-5
c1 = 1e-5
c2 = 1e-5
cf = 1e-6
kf = 1.0
exchange = "permeability"

[time]
t_max = 0.02
steps = 10
report_steps = [5, 10]

[nlmc]
layers = [1, 2]
exchange = "full"
error_weighting = "unweighted"

[output]
fields = true
dump_projection = true
"#,
    );
    if sources {
        text.push_str(
            r#"
[[sources]]
rect = [0.10, 0.10, 0.25, 0.25]
continuum = "fracture"
rate = 1e-3

[[sources]]
rect = [0.70, 0.65, 0.80, 0.80]
continuum = "fracture"
rate = -1e-3
"#,
        );
    }
    text
}

fn setup(sources: bool) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("fractures.txt"), FRACTURES).unwrap();
    let path = dir.path().join("case.toml");
    fs::write(&path, config_text(sources)).unwrap();
    (dir, path)
}

fn nlmc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nlmc")).args(args).output().unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn sweep_writes_expected_outputs_and_is_repeatable() {
    let (dir, path) = setup(true);
    let problem = Problem::load(&path).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_sweep(&problem, Some(path.clone()), &a, &[1, 2], "sweep").unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    pool.install(|| cmd_sweep(&problem, Some(path.clone()), &b, &[1, 2], "sweep")).unwrap();
    for name in [
        "errors_4x4.csv",
        "errors_6x6.csv",
        "fine.vtk",
        "fine_fractures.csv",
        "nlmc_4x4_s1.vtk",
        "nlmc_6x6_s2_fractures.csv",
        "R_4x4_s2.mtx",
    ] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs between runs");
    }
    let csv = String::from_utf8(read(&a, "errors_4x4.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("m,s,continuum"));
    // Two report steps, two depths, three continua.
    assert_eq!(lines.count(), 2 * 2 * 3);
    let manifest: serde_json::Value = serde_json::from_slice(&read(&a, "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "sweep");
}

#[test]
fn without_sources_pressure_stays_at_initial_value() {
    let (dir, path) = setup(false);
    let problem = Problem::load(&path).unwrap();
    let fine = cmd_run_fine(&problem, None, &dir.path().join("out")).unwrap();
    let p0 = problem.config.time.p0;
    assert!(fine.final_state.p.iter().all(|&p| (p - p0).abs() < 1e-12));
    let runs = cmd_sweep(&problem, None, &dir.path().join("out"), &[1], "sweep").unwrap();
    for run in &runs {
        let p = &run.layers[0].snapshots[&problem.config.time.steps];
        assert!(p.iter().all(|&v| (v - p0).abs() < 1e-12));
    }
}

#[test]
fn missing_fracture_file_fails_before_writing() {
    let (dir, path) = setup(true);
    fs::remove_file(dir.path().join("fractures.txt")).unwrap();
    let out = dir.path().join("out");
    assert!(Problem::load(&path).is_err());
    let res = nlmc(&["run-fine", "-c", path.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("fractures.txt"));
    assert!(!out.exists());
}

#[test]
fn invalid_config_exits_with_code_two() {
    let (dir, path) = setup(true);
    let text = config_text(true).replace("steps = 10", "steps = 0");
    fs::write(&path, text).unwrap();
    let out = dir.path().join("out");
    let res = nlmc(&["sweep", "-c", path.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
    let res = nlmc(&["sweep", "-c", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn binary_verbs_run() {
    let (dir, path) = setup(true);
    let cfg = path.to_str().unwrap();
    let out = dir.path().join("nlmc");
    let res = nlmc(&["run-nlmc", "-c", cfg, "-o", out.to_str().unwrap(), "-s", "1", "--threads", "1"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("errors_6x6.csv").exists());
    assert!(out.join("nlmc_4x4_s1.vtk").exists());
    assert!(!out.join("nlmc_4x4_s2.vtk").exists());

    let basis = dir.path().join("basis");
    let res = nlmc(&[
        "dump-basis", "-c", cfg, "-o", basis.to_str().unwrap(), "--coarse", "4x4", "-s", "1", "--cell", "0",
        "--continuum", "f",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(basis.join("basis_4x4_s1_cell0_f.vtk").exists());

    let res = nlmc(&["dump-basis", "-c", cfg, "-o", basis.to_str().unwrap(), "--cell", "999"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn config_round_trips_through_toml() {
    let (dir, path) = setup(true);
    let cfg = ExperimentConfig::load(&path).unwrap();
    let again = ExperimentConfig::from_toml(&cfg.to_toml(), dir.path()).unwrap();
    assert_eq!(cfg, again);
}
