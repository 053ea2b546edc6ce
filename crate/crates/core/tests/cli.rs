use std::path::Path;
use std::process::{Command, Output};

use mucogarch::cli::{ExperimentConfig, DEFAULT_CONFIG};
use mucogarch::Error;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mucogarch"));
    c.env_remove("MUCOGARCH_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const D1: &str = r#"{
  "model": { "a": [[0.5]], "b": [[-1.0]], "c": [[1.0]] },
  "levy": { "dim": 1, "jumps": { "kind": "compound_poisson", "rate": 2.0,
            "epsilon": { "law": "constant", "value": 1.0 } } },
  "run": { "horizon": 5.0, "grid_step": 0.5, "delta": 1.0, "n_paths": 2, "seed": 3, "burn_in": 0 }
}"#;

fn d2(a: &str, b: &str, rate: f64, n_paths: usize) -> String {
    format!(
        r#"{{
  "model": {{ "a": {a}, "b": {b}, "c": [[1.0, 0.0], [0.0, 1.0]] }},
  "levy": {{ "dim": 2, "jumps": {{ "kind": "compound_poisson", "rate": {rate},
            "epsilon": {{ "law": "constant", "value": 1.0 }} }} }},
  "run": {{ "horizon": 4.0, "grid_step": 0.25, "delta": 0.5, "n_paths": {n_paths}, "seed": 9, "burn_in": 0 }},
  "check": {{ "n_mc": 20000 }}
}}"#
    )
}

#[test]
fn minimal_d1_simulation_writes_t_y_v_g_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), D1);
    let out = tmp.path().join("out");
    let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("path_0000.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,y_1_1,v_1_1,g_1");
    assert_eq!(csv.lines().count(), 12);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 4);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["version"].as_str().unwrap().starts_with('v'));
}

#[test]
fn reruns_are_byte_identical_and_seed_flag_matters() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), D1);
    let dirs = ["a", "b", "c"].map(|d| tmp.path().join(d));
    for (dir, seed) in dirs.iter().zip(["3", "3", "4"]) {
        let o = run(&["simulate", "--config", &cfg, "--seed", seed, "--out", dir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["path_0001.csv", "jumps_0001.csv", "manifest.json"] {
        assert_eq!(std::fs::read(dirs[0].join(f)).unwrap(), std::fs::read(dirs[1].join(f)).unwrap(), "{f}");
    }
    assert_ne!(std::fs::read(dirs[0].join("path_0001.csv")).unwrap(), std::fs::read(dirs[2].join("path_0001.csv")).unwrap());
}

#[test]
fn environment_overrides_the_config_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), D1);
    let out = tmp.path().join("from_env");
    let o = bin().args(["simulate", "--config", &cfg]).env("MUCOGARCH_OUT", &out).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn zero_paths_is_a_config_error_without_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &D1.replace("\"n_paths\": 2", "\"n_paths\": 0"));
    let out = tmp.path().join("out");
    let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_paths"));
    assert!(!out.exists());
}

#[test]
fn config_diagnostics_name_the_line() {
    let bad_c = D1.replace("\"c\": [[1.0]]", "\"c\": [[-1.0]]");
    match ExperimentConfig::parse(&bad_c, "cfg.json") {
        Err(Error::Config(m)) => assert!(m.starts_with("cfg.json:2: c:"), "{m}"),
        other => panic!("{other:?}"),
    }
    let bad_delta = D1.replace("\"delta\": 1.0", "\"delta\": 0.7");
    match ExperimentConfig::parse(&bad_delta, "cfg.json") {
        Err(Error::Config(m)) => assert!(m.starts_with("cfg.json:5: delta"), "{m}"),
        other => panic!("{other:?}"),
    }
    let negative_rate = D1.replace("\"rate\": 2.0", "\"rate\": -2.0");
    assert!(matches!(ExperimentConfig::parse(&negative_rate, "x"), Err(Error::Config(_))));
    let negative_scale = D1.replace("\"value\": 1.0", "\"value\": -1.0");
    assert!(matches!(ExperimentConfig::parse(&negative_scale, "x"), Err(Error::Config(_))));
    match ExperimentConfig::parse("{\n  \"model\": [1,\n", "broken.json") {
        Err(Error::Config(m)) => assert!(m.starts_with("broken.json:"), "{m}"),
        other => panic!("{other:?}"),
    }
    let unknown = D1.replace("\"seed\": 3", "\"seed\": 3, \"sede\": 4");
    assert!(matches!(ExperimentConfig::parse(&unknown, "x"), Err(Error::Config(_))));
    assert!(ExperimentConfig::parse(DEFAULT_CONFIG, "default").is_ok());
}

#[test]
fn missing_config_and_unknown_criterion_exit_2() {
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    assert_eq!(run(&["validate", "--only", "nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["check", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn counterexample_prints_minus_eleven_quarters() {
    let o = run(&["counterexample"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let q: f64 = s.lines().find_map(|l| l.strip_prefix("x_v1_x = ")).unwrap().parse().unwrap();
    assert!((q + 2.75).abs() <= 1e-12);
    let m: f64 = s.lines().find_map(|l| l.strip_prefix("min_eigenvalue_v1 = ")).unwrap().parse().unwrap();
    assert!(m < 0.0);
    assert!(s.contains("result = PASS"));
}

#[test]
fn validate_only_counterexample() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["validate", "--only", "counterexample", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let s = stdout(&o);
    assert_eq!(s.lines().filter(|l| l.starts_with("[PASS]")).count(), 1);
    assert!(std::fs::read_to_string(tmp.path().join("validation.csv")).unwrap().contains("counterexample"));
}

#[test]
fn broken_tolerance_fails_with_the_criterion_named() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &DEFAULT_CONFIG.replace("\"tolerance_scale\": 1.0", "\"tolerance_scale\": 0.0"));
    let o = run(&["validate", "--config", &cfg, "--only", "scalar-oracle"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("failed: scalar-oracle"), "{}", stdout(&o));
}

fn check_output(config: &str) -> String {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), config);
    let o = run(&["check", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("o/check.json").exists());
    stdout(&o)
}

#[test]
fn check_with_zero_a_is_satisfied_everywhere() {
    let s = check_output(&d2("[[0.0, 0.0], [0.0, 0.0]]", "[[-1.0, 0.0], [0.0, -2.0]]", 1.0, 1));
    for k in ["log_moment", "k1", "k2", "k4"] {
        assert!(s.contains(&format!("{k}.verdict = SATISFIED")), "{k}: {s}");
    }
    assert!(s.contains("quartic_norm.holds = true"));
}

#[test]
fn check_reports_a_defective_b() {
    let s = check_output(&d2("[[0.1, 0.0], [0.0, 0.1]]", "[[-0.0526802578289131, 0.0], [1.0, -0.0526802578289131]]", 1.0, 1));
    assert!(s.contains("not diagonalizable"), "{s}");
    assert!(s.contains("spectral.max_re_curly_b"));
    assert!(!s.contains("k1.verdict"));
}

#[test]
fn check_with_huge_rate_is_violated() {
    let s = check_output(&d2("[[0.4, 0.0], [0.0, 0.4]]", "[[-1.0, 0.0], [0.0, -1.0]]", 500.0, 1));
    assert!(s.contains("k1.verdict = VIOLATED"), "{s}");
    assert!(s.contains("log_moment.verdict = VIOLATED"));
}

#[test]
fn moments_command_writes_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), D1);
    let o = run(&["moments", "--config", &cfg, "--out", tmp.path().join("m").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    // b = -1, a = 0.5, sigma = 2: curly_b = -1.5, E Y = 2 * 0.25 / 1.5
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("m/moments.json")).unwrap()).unwrap();
    let ey = doc["mean_y"][0][0].as_f64().unwrap();
    assert!((ey - 1.0 / 3.0).abs() < 1e-14);

    let unstable = write_config(tmp.path(), &D1.replace("\"rate\": 2.0", "\"rate\": 20.0"));
    let o = run(&["moments", "--config", &unstable, "--out", tmp.path().join("u").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("stationary = false"));
}
