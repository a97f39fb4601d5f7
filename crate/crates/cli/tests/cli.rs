use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn rds_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rds-lab"))
        .args(args)
        .env_remove("RDS_SEED")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_single_line_error(out: &Output, code: i32, needle: &str) {
    assert_eq!(out.status.code(), Some(code));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "stderr: {err}");
    assert!(err.starts_with("error: ") && err.contains(needle), "stderr: {err}");
}

#[test]
fn sync_example_writes_report() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = rds_lab(&[
        "sync", "--system", "doublewell", "--d", "2", "--pair", "-2,0:2,0", "--T", "100", "--trials", "200", "--seed",
        "7", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success() && out.stdout.is_empty());
    let r = read_json(&path);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["op"], "sync");
    assert_eq!(r["seed"], 7);
    assert!(r["freq"].as_f64().unwrap() >= 0.99, "{r}");
}

#[test]
fn circle_clusters_example() {
    let r = json_of(&rds_lab(&[
        "clusters", "--system", "circlemap", "--eps-c", "0.3", "--T", "500", "--m", "200", "--trials", "400", "--seed",
        "7",
    ]));
    assert_eq!(r["n_hat_cloud"], 2);
    let mass = r["diag_mass"].as_f64().unwrap();
    assert!((0.4..=0.6).contains(&mass), "{mass}");
}

#[test]
fn cocycle_check_is_exact() {
    for system in ["doublewell", "circlemap"] {
        let r = json_of(&rds_lab(&["cocycle-check", "--system", system, "--cases", "5", "--s", "2", "--t", "3"]));
        assert_eq!(r["max_deviation"].as_f64(), Some(0.0), "{system}");
        assert_eq!(r["bit_exact"], true);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["sync", "--pair", "-1,0.5:1.5,0", "--pair", "0,2:0,-2", "--T", "10", "--trials", "30", "--seed", "3"];
    let a = rds_lab(&args);
    let b = rds_lab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let mut threaded = args.to_vec();
    threaded.extend(["--jobs", "3"]);
    assert_eq!(a.stdout, rds_lab(&threaded).stdout);
    let mut other = args.to_vec();
    *other.last_mut().unwrap() = "4";
    assert_ne!(a.stdout, rds_lab(&other).stdout);
}

#[test]
fn dumped_config_reproduces_the_run() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let first = rds_lab(&[
        "stability", "--x", "1,0", "--r", "0.3", "--T", "5", "--trials", "20", "--seed", "11", "--dump-config",
        cfg.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&cfg).unwrap();
    assert!(text.lines().any(|l| l == "seed = 11" || l == "seed=11"), "{text}");
    let second = rds_lab(&["stability", "--config", cfg.to_str().unwrap()]);
    assert_eq!(json_of(&first)["params"], json_of(&second)["params"]);
    assert_eq!(first.stdout, second.stdout);
    // Explicit flags win over the file.
    let third = json_of(&rds_lab(&["stability", "--config", cfg.to_str().unwrap(), "--trials", "10"]));
    assert_eq!(third["params"]["trials"], 10);
    assert_eq!(third["params"]["seed"], 11);
}

#[test]
fn errors_are_single_lines() {
    assert_single_line_error(&rds_lab(&["sync", "--pair", "0,0:1,0", "--bogus"]), 2, "--bogus");
    assert_single_line_error(&rds_lab(&["sync", "--pair", "0,0:1,0", "--T", "0.0005"]), 2, "multiple of dt");
    assert_single_line_error(&rds_lab(&["gronwall", "--system", "circlemap"]), 2, "doublewell");
    assert_single_line_error(&rds_lab(&["sync", "--pair", "0,0;1,0"]), 2, "pair");
    assert_single_line_error(&rds_lab(&["clusters", "--m", "5"]), 2, "m");
    assert_single_line_error(&rds_lab(&["stability", "--x", "0", "--config", "/nonexistent/cfg"]), 1, "cfg");
    assert!(!rds_lab(&[]).status.success());
}

#[test]
fn help_succeeds() {
    let out = rds_lab(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["cocycle-check", "gronwall", "lyapunov", "sync", "stability", "contract", "transit", "steer", "pullback", "clusters", "noise-stats"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_rds-lab"));
        cmd.args(["noise-stats", "--T", "1"]).args(extra).env_remove("RDS_SEED");
        if let Some(s) = env {
            cmd.env("RDS_SEED", s);
        }
        json_of(&cmd.output().unwrap())
    };
    assert_eq!(run(None, &[])["seed"], 0);
    assert_eq!(run(Some("42"), &[])["seed"], 42);
    assert_eq!(run(Some("42"), &["--seed", "5"])["seed"], 5);
    assert_ne!(run(Some("42"), &[])["mean"], run(None, &[])["mean"]);
}

#[test]
fn epoch_is_recorded_when_given() {
    let r = json_of(&rds_lab(&["noise-stats", "--T", "1", "--epoch", "3"]));
    assert_eq!(r["epoch"], "3");
    assert!(json_of(&rds_lab(&["noise-stats", "--T", "1"])).get("epoch").is_none());
}

#[test]
fn csv_outputs() {
    let dir = tempdir().unwrap();
    let noise = dir.path().join("noise.csv");
    json_of(&rds_lab(&["noise-stats", "--T", "1", "--csv", noise.to_str().unwrap()]));
    let text = std::fs::read_to_string(&noise).unwrap();
    assert!(text.starts_with("t,w_1,w_2\n0,0,0\n"));
    assert_eq!(text.lines().count(), 1002);

    let trace = dir.path().join("steer.csv");
    let r = json_of(&rds_lab(&[
        "steer", "--kind", "contract", "--x", "-2,0", "--y", "2,0", "--csv", trace.to_str().unwrap(),
    ]));
    assert_eq!(r["verdict"], true);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("t,x_1,x_2,y_1,y_2\n"));
    assert_eq!(text.lines().count() as u64, r["trace_points"].as_u64().unwrap() + 1);

    let clouds = dir.path().join("clouds.csv");
    let r = json_of(&rds_lab(&[
        "pullback", "--system", "circlemap", "--horizons", "100,200", "--m", "30", "--csv", clouds.to_str().unwrap(),
    ]));
    assert_eq!(r["sampler"]["mode"], "exact");
    let text = std::fs::read_to_string(&clouds).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("trial,"));
    assert!(lines.count() >= 30);
}

#[test]
fn lyapunov_zero_noise_control() {
    let r = json_of(&rds_lab(&["lyapunov", "--zero-noise", "--dt", "1e-4", "--T", "100", "--x0", "0,0"]));
    assert!((r["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-2, "{r}");
}
