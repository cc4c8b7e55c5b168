use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_entangled-lqg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_SWEEP: &str = "beta1_sq_steps = 7\nphase_grid = 6\nrefine_iters = 8\n";

#[test]
fn sweep_csv_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.cfg", SMALL_SWEEP);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}.csv"));
        let status = run(&["sweep", "--config", &cfg, "--threads", threads, "--output", out.to_str().unwrap()]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        outputs.push(fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8);
    assert_eq!(lines[0], "beta1_sq,theta1_opt,theta2_opt,e_min,cheap_bound,residual,converged");
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
}

#[test]
fn sweep_writes_to_stdout_and_logs_progress() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.cfg", "beta1_sq_steps = 2\nphase_grid = 4\nrefine_iters = 2\n");
    let out = run(&["sweep", "--config", &cfg]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("[2/2]"));
}

#[test]
fn output_key_in_config_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_config.csv");
    let text = format!("beta1_sq_steps = 1\nphase_grid = 4\nrefine_iters = 1\noutput = {}\n", target.display());
    let cfg = write_config(dir.path(), "sweep.cfg", &text);
    assert!(run(&["sweep", "--config", &cfg]).status.success());
    assert_eq!(fs::read_to_string(target).unwrap().lines().count(), 2);
}

#[test]
fn point_reports_bound_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "point.cfg", "beta1_sq = 1\ntheta1 = 1.18\ntheta2 = 0\n");
    let out = run(&["point", "--config", &cfg]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let e_min: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("e_min = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((e_min - 1.2317).abs() < 1e-3, "{e_min}");
    for key in ["j_min", "filter_residual", "error_abscissa", "V ="] {
        assert!(stdout.contains(key), "missing {key}");
    }
}

#[test]
fn validate_passes_default_and_flags_undamped_oscillator() {
    let out = run(&["validate"]);
    assert!(out.status.success());
    assert!(!String::from_utf8(out.stdout).unwrap().contains("FAIL"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.cfg", "lambda = 0\ngamma = 0\n");
    let out = run(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL drift Hurwitz"));
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "bogus = 1\n");
    let out = run(&["point", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown key `bogus`"));

    let out = run(&["sweep", "--config", "/nonexistent/cfg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mc_check_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mc.cfg", "beta1_sq = 1\ntheta1 = 1.18\ntheta2 = 0\ndt = 2e-3\n");
    let args = ["mc-check", "--config", &cfg, "--trajectories", "6", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.code() == Some(0) || a.status.code() == Some(2));
    assert_eq!(a.stdout, b.stdout);
    let stdout = String::from_utf8(a.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.contains("error_cov[")).count(), 10);
    assert!(stdout.contains("max deviation (SE)"));
}
