use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BROWNIAN: &str = r#"
[model]
preset = "brownian(mu=-0.5, sigma=1)"

[fund]
a = 1.0
theta = 1.0
r = 0.05
"#;

const ALM: &str = r#"
[alm]
b = 1.0
a = 1.0
rho = 0.02
mu = -0.5
sigma = 1.0
theta = 1.0
r = 0.07
"#;

fn write(dir: &TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fundcost"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn classify_presets() {
    let dir = TempDir::new().unwrap();
    let bm = write(&dir, "bm.toml", BROWNIAN);
    let out = run(&bm, &["classify"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["classification"], "NonAutonomous");

    let up = write(&dir, "up.toml", &BROWNIAN.replace("mu=-0.5", "mu=0.5"));
    assert_eq!(json(&run(&up, &["classify"]))["result"]["classification"], "RuinUncertain");

    let bad = write(&dir, "bad.toml", &BROWNIAN.replace(", sigma=1", ""));
    let out = run(&bad, &["classify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
}

#[test]
fn cost_modes() {
    let dir = TempDir::new().unwrap();
    let bm = write(&dir, "bm.toml", BROWNIAN);
    let v = json(&run(&bm, &["cost", "--mode", "perpetual"]));
    assert!((v["result"]["value"].as_f64().unwrap() - 10.4237).abs() < 5e-5);
    assert_eq!(v["config"]["fund"]["theta"], 1.0);

    let out = run(&bm, &["cost", "--mode", "asymptotic", "--t", "50"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,w,err,method"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((row[1].parse::<f64>().unwrap() - 9.198).abs() < 5e-4);
    assert_eq!(row[3], "asymptotic");

    let g = json(&run(&bm, &["cost", "--force-general"]));
    assert_eq!(g["result"]["method"], "general");
    assert!((g["result"]["value"].as_f64().unwrap() - 10.423_712_71).abs() < 1e-6);

    let r = json(&run(&bm, &["cost", "--mode", "renewal", "--t", "10,50", "--format", "json"]));
    assert_eq!(r["result"]["method"], "renewal");
    assert!((r["result"]["w"][1].as_f64().unwrap() - 9.1979).abs() < 1e-3);
}

#[test]
fn weak_drift_is_a_precondition_failure() {
    let dir = TempDir::new().unwrap();
    let weak = write(&dir, "weak.toml", &BROWNIAN.replace("mu=-0.5", "mu=-0.1"));
    let out = run(&weak, &["cost", "--mode", "asymptotic", "--t", "50"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu < -sqrt(2 r sigma^2 / 3)"));
    let general = run(&weak, &["cost", "--mode", "asymptotic", "--t", "50", "--force-general"]);
    assert_eq!(general.status.code(), Some(4));
}

#[test]
fn config_errors() {
    let dir = TempDir::new().unwrap();
    let both = write(&dir, "both.toml", &format!("{BROWNIAN}{ALM}"));
    assert_eq!(run(&both, &["classify"]).status.code(), Some(2));
    let extra = write(&dir, "extra.toml", &format!("{BROWNIAN}\n[sim]\nsteps = 3\n"));
    assert_eq!(run(&extra, &["classify"]).status.code(), Some(2));
    let no_t = write(&dir, "bm.toml", BROWNIAN);
    assert_eq!(run(&no_t, &["cost", "--mode", "renewal"]).status.code(), Some(2));
    let missing = dir.path().join("absent.toml");
    assert_eq!(run(&missing, &["classify"]).status.code(), Some(2));
}

#[test]
fn alm_reports() {
    let dir = TempDir::new().unwrap();
    let alm = write(&dir, "alm.toml", &format!("{ALM}\n[sim]\nn_paths = 300\ndiscount_cutoff = 0.001\n"));
    let v = json(&run(&alm, &["alm", "--mode", "perpetual"]));
    assert!((v["result"]["value"].as_f64().unwrap() - 17.911).abs() < 5e-4);

    let a = run(&alm, &["alm", "--mode", "simulate", "--seed", "42"]);
    let b = run(&alm, &["alm", "--mode", "simulate", "--seed", "42"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let est = json(&a);
    assert_eq!(est["result"]["fingerprint"]["seed"], 42);
    assert_eq!(est["config"]["sim"]["seed"], 42);

    let bad = write(&dir, "bad.toml", &ALM.replace("r = 0.07", "r = 0.02"));
    let out = run(&bad, &["alm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("r > rho"));
}

#[test]
fn out_flag_and_overrides() {
    let dir = TempDir::new().unwrap();
    let bm = write(&dir, "bm.toml", &format!("{BROWNIAN}\n[sim]\nseed = 1\n"));
    let dest = dir.path().join("report.json");
    let out = run(&bm, &["cost", "--seed", "9", "--out", dest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&dest).unwrap()).unwrap();
    assert_eq!(v["config"]["sim"]["seed"], 9);
}

#[test]
fn validate_brownian_defaults_pass() {
    let dir = TempDir::new().unwrap();
    let bm = write(&dir, "bm.toml", BROWNIAN);
    let out = run(&bm, &["validate"]);
    let v = json(&out);
    assert_eq!(out.status.code(), Some(0), "{v}");
    assert_eq!(v["result"]["passed"], true);
}

#[test]
fn validate_catches_coarse_steps() {
    let dir = TempDir::new().unwrap();
    let bm = write(&dir, "bm.toml", &format!("{BROWNIAN}\n[sim]\ndt = 1.0\nn_paths = 4000\n"));
    let out = run(&bm, &["validate"]);
    assert_eq!(out.status.code(), Some(5));
    let failed: Vec<String> = json(&out)["result"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["status"] == "fail")
        .map(|c| c["name"].as_str().unwrap().to_owned())
        .collect();
    assert!(failed.iter().all(|n| n.starts_with("mc_")), "{failed:?}");
    assert!(!failed.is_empty());
}

#[test]
fn validate_general_model() {
    let dir = TempDir::new().unwrap();
    let body = r#"
[model]
drift = "-0.2 - 0.3*x"
diffusion_sq = "1"

[fund]
a = 1.0
theta = 1.0
r = 0.05

[sim]
n_paths = 4000
discount_cutoff = 1e-5
"#;
    let cfg = write(&dir, "affine.toml", body);
    let out = run(&cfg, &["validate"]);
    let v = json(&out);
    assert_eq!(out.status.code(), Some(0), "{v}");
    let checks = v["result"]["checks"].as_array().unwrap();
    let status = |n: &str| checks.iter().find(|c| c["name"] == n).unwrap()["status"].clone();
    assert_eq!(status("transform_ode_vs_closed_form"), "not_applicable");
    assert_eq!(status("mc_perpetual_vs_closed_form"), "not_applicable");
    assert_eq!(status("mc_perpetual_vs_ode"), "pass");
    assert_eq!(status("mc_ruin_time_vs_ode"), "pass");
}
