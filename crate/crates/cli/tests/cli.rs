use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn bregvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bregvar"))
        .args(args)
        .env_remove("BREGVAR_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn young_info_keys() {
    let out = bregvar(&["young", "info", "--family", "power", "--p", "2.0", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["k_phi"], 4.0);
    assert_eq!(v["d_phi"], 2.0);
    assert_eq!(v["D_phi"], 2.0);
    assert_eq!(v["c_phi"], 4.0);
    assert_eq!(v["exact"], true);
    let text = stdout(&out);
    assert!(text.contains("4.0000000000000000"), "{text}");
}

#[test]
fn run_enumerate_walk() {
    let out = bregvar(&["run", "isometry", "enumerate", "depth=3", "phi=power:4", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let m = json(&out);
    assert_eq!(m["result"]["lhs"], 21.0);
    assert_eq!(m["result"]["rhs"], 21.0);
    assert_eq!(m["result"]["verdict"], "pass");
    assert_eq!(m["config"]["depth"], 3);
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["passed"], true);
}

#[test]
fn empty_config_lists_required_keys() {
    let out = bregvar(&["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing required key `command`"));
}

#[test]
fn unknown_keys_are_usage_errors() {
    let out = bregvar(&["run", "doob", "NN=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown field `NN`"));
    let out = bregvar(&["doob", "--NN", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bregvar(&["isometry", "--mode", "stopped", "--N", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("interval"));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "command = \"isometry\"\nmode = \"mc\"\nphi = \"power:2\"\nN = 2000\nM = 16\n\
         [model]\nsigma2 = 0.0\njumps = { type = \"cp\", intensity = 2.0, law = \"two_point\", a = 1.0 }\n",
    )
    .unwrap();
    let manifest = dir.path().join("manifest.json");
    let out = bregvar(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "N=4000",
        "seed=11",
        &format!("manifest={}", manifest.display()),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let m = json(&out);
    assert_eq!(m["config"]["N"], 4000);
    assert_eq!(m["config"]["seed"], 11);
    let saved: Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(saved["result"], m["result"]);
}

#[test]
fn simulate_then_variation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    let trace = dir.path().join("trace.csv");
    let model = r#"{"sigma2":1.0,"jumps":{"type":"cp","intensity":2.0,"law":"two_point","a":1.0}}"#;
    let sim = bregvar(&[
        "simulate", "--model", model, "--T", "1", "--M", "256", "--seed", "7", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(sim.status.code(), Some(0), "{}", stderr(&sim));
    let csv = fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("t,x,is_jump,x_left\n"));
    assert!(csv.lines().count() > 257);

    let var = bregvar(&[
        "variation", "--phi", "power:2", "--in", path.to_str().unwrap(), "--route", "pathwise",
        "--sigma2", "1", "--out", trace.to_str().unwrap(), "--json",
    ]);
    assert_eq!(var.status.code(), Some(0), "{}", stderr(&var));
    let rows = fs::read_to_string(&trace).unwrap();
    assert!(rows.starts_with("t,v,cont_term,jump_term\n"));
    let report = json(&var);
    assert_eq!(report["monotone"], true);
    // for φ = λ² the continuous part is σ²t
    assert!((report["continuous_term"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let missing = bregvar(&["variation", "--in", path.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("sigma2"));
}

#[test]
fn seed_flag_env_and_default() {
    let flag = bregvar(&["simulate", "--M", "16", "--seed", "99"]);
    let env = Command::new(env!("CARGO_BIN_EXE_bregvar"))
        .args(["simulate", "--M", "16"])
        .env("BREGVAR_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
    let default = bregvar(&["simulate", "--M", "16"]);
    let seven = bregvar(&["simulate", "--M", "16", "--seed", "7"]);
    assert_eq!(default.stdout, seven.stdout);
    assert_ne!(default.stdout, flag.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_bregvar"))
        .args(["simulate", "--M", "16"])
        .env("BREGVAR_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_3() {
    let out = bregvar(&["semigroup", "density", "--t", "0.0001", "--m", "6"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("unresolved"));
}

#[test]
fn orlicz_norm_of_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("w.csv");
    fs::write(&data, "value,weight\n3,1\n-4,1\n").unwrap();
    let out = bregvar(&["orlicz", "norm", "--phi", "power:2", "--data", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "5.00000000000");
}

#[test]
fn semigroup_density_csv() {
    let out = bregvar(&["semigroup", "density", "--symbol", r#"{"sigma2":2.0}"#, "--m", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("x,p\n"));
    assert_eq!(text.lines().count(), 1025);
}

#[test]
fn hardy_stein_elliptic_and_parabolic() {
    let out = bregvar(&[
        "hardy-stein", "elliptic", "--phi", "power:4", "--interval", "0,1", "--x", "0.5", "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["identity"]["verdict"], "pass");
    assert!(v["exit_mc"].is_null());

    let out = bregvar(&[
        "hardy-stein", "parabolic", "--phi", "power:3", "--f", "gaussian:1.0", "--T", "8", "--K",
        "14", "--m", "10", "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["verdict"], "pass");
    assert!(v["accounting_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn suite_is_deterministic_and_worker_invariant() {
    let a = bregvar(&["suite", "--only", "3", "--only", "8", "--json"]);
    let b = bregvar(&["--sequential", "suite", "--only", "3", "--only", "8", "--json"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["passed"], 2);
    assert_eq!(v["config"]["level"], "quick");
}

#[test]
fn suite_fails_loudly_on_zero_tolerance() {
    let out = bregvar(&["run", "suite", "--quick", "only=[2]", "tol=[\"conditional=0\"]"]);
    assert_eq!(out.status.code(), Some(1));
    let out = bregvar(&["suite", "--only", "13", "--tol", "luxemburg=0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
    let out = bregvar(&["suite", "--tol", "bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
}
