use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const WORKED: &str = r#"{
  "seed": 11,
  "horizon": 15,
  "runs": 3,
  "subpopulations": [
    {"label": "home", "offspring": {"family": "poisson", "mean": 2.0},
     "resource": {"family": "deterministic", "value": 0.9},
     "claims": {"family": "uniform", "lower": 0.0, "upper": 1.0}, "initial_count": 100},
    {"label": "immigrant", "offspring": {"family": "poisson", "mean": 3.0},
     "resource": {"family": "deterministic", "value": 0.5},
     "claims": {"family": "exponential", "rate": 1.0}, "initial_count": 100}
  ]
}"#;

fn rdbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdbp")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn simulate_writes_trace_and_summary_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", WORKED);
    let mut bytes = Vec::new();
    for tag in ["a", "b"] {
        let trace = dir.path().join(format!("{tag}.csv"));
        let summary = dir.path().join(format!("{tag}.json"));
        let out = rdbp(&["simulate", "--config", &cfg, "--out", trace.to_str().unwrap(), "--summary", summary.to_str().unwrap()]);
        assert!(out.status.success());
        bytes.push((std::fs::read(&trace).unwrap(), std::fs::read(&summary).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
    let header = String::from_utf8_lossy(&bytes[0].0).lines().next().unwrap().to_owned();
    for col in ["run_id", "t", "gamma_h", "gamma_i", "tau_t", "alpha_t"] {
        assert!(header.split(',').any(|c| c == col), "header {header}");
    }
    let s: Value = serde_json::from_slice(&bytes[0].1).unwrap();
    assert_eq!(s["runs"], 3);
    assert_eq!(s["base_seed"], 11);
    assert!(s["joint_survival_fraction"].as_f64().unwrap() <= 1.0);

    let other = json(&rdbp(&["simulate", "--config", &cfg, "--seed", "12"]));
    assert_eq!(other["base_seed"], 12);
}

#[test]
fn missing_seed_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &WORKED.replace(r#""seed": 11,"#, ""));
    let out = rdbp(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let missing = rdbp(&["simulate", "--config", "/nonexistent/c.json"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn equilibrium_reports_the_worked_pair() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&rdbp(&["equilibrium", "--config", &write(dir.path(), "c.json", WORKED)]));
    let sols = v["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 1);
    assert!((sols[0]["tau"].as_f64().unwrap() - 0.874_217_465_798_717).abs() < 1e-9);
    assert!((sols[0]["alpha"].as_f64().unwrap() - 0.879_768_754_376_144).abs() < 1e-9);
    assert_eq!(sols[0]["classification"], "strict");
    assert_eq!(v["dropped"].as_array().unwrap().len(), 1);
    assert!(v["ratio_multipliers"][0].as_f64().unwrap() > 1.0);
}

#[test]
fn equilibrium_any_alpha_and_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let identical = WORKED
        .replace(r#""mean": 3.0"#, r#""mean": 2.0"#)
        .replace(r#"{"family": "exponential", "rate": 1.0}"#, r#"{"family": "uniform", "lower": 0.0, "upper": 1.0}"#)
        .replace(r#""value": 0.9"#, r#""value": 0.4"#)
        .replace(r#""value": 0.5"#, r#""value": 0.4"#);
    let v = json(&rdbp(&["equilibrium", "--config", &write(dir.path(), "i.json", &identical)]));
    assert_eq!(v["solutions"][0]["alpha"], "any");
    assert!((v["solutions"][0]["tau"].as_f64().unwrap() - 0.4f64.sqrt()).abs() < 1e-9);

    // resources too small for any positive ratio
    let starved = WORKED.replace(r#""value": 0.9"#, r#""value": 0.1"#);
    let v = json(&rdbp(&["equilibrium", "--config", &write(dir.path(), "s.json", &starved)]));
    assert!(v["solutions"].as_array().unwrap().is_empty());
}

#[test]
fn brs_bound_and_run_floor() {
    let dist = r#"{"family": "uniform", "lower": 0.0, "upper": 1.0}"#;
    let v = json(&rdbp(&["brs", "--dist", dist, "--n", "100", "--budget", "2", "--runs", "200", "--seed", "1"]));
    assert!((v["bound"].as_f64().unwrap() - 20.0).abs() < 1e-9);
    assert!(v["estimate"].as_f64().unwrap() <= 20.0 + v["ci"].as_f64().unwrap());
    let out = rdbp(&["brs", "--dist", dist, "--n", "100", "--budget", "2", "--runs", "50", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn transport_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.csv", "a\\b,1,2\n2,0,1\n1,1,0\n");
    let out = rdbp(&["transport", "nw", "--input", &input]);
    assert!(out.status.success());
    let flows = String::from_utf8(out.stdout).unwrap();
    let numbers: Vec<f64> = flows
        .lines()
        .flat_map(|l| l.split(','))
        .filter_map(|c| c.trim().parse().ok())
        .collect();
    assert!(numbers.ends_with(&[1.0, 1.0, 0.0, 1.0]), "{flows}");

    let monge = write(dir.path(), "m.csv", "a\\b,1,1,1\n1,0,1,4\n1,1,0,1\n1,4,1,0\n");
    assert_eq!(json(&rdbp(&["transport", "check-monge", "--input", &monge]))["monge"], true);
    let v = json(&rdbp(&["transport", "oracle", "--input", &monge]));
    assert_eq!(v["optimal_cost"], v["northwest_cost"]);
    assert_eq!(v["optimal_cost"].as_f64().unwrap(), 0.0);
    // row 0 prefers column 2, so the matrix is not Monge
    let anti = write(dir.path(), "x.csv", "a\\b,1,1\n1,1,0\n1,0,1\n");
    assert_eq!(json(&rdbp(&["transport", "check-monge", "--input", &anti]))["monge"], false);

    let v = json(&rdbp(&[
        "transport",
        "quantile-cost",
        "--src",
        r#"{"family": "uniform", "lower": 0.0, "upper": 1.0}"#,
        "--dst",
        r#"{"family": "uniform", "lower": 0.0, "upper": 2.0}"#,
    ]));
    assert!((v["cost"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-6);

    let unbalanced = write(dir.path(), "u.csv", "a\\b,1,3\n2,0,1\n1,1,0\n");
    assert_eq!(rdbp(&["transport", "nw", "--input", &unbalanced]).status.code(), Some(2));
    assert!(rdbp(&["transport", "nw", "--input", &unbalanced, "--normalize"]).status.success());
}

#[test]
fn control_ranks_admissible_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg: Value = serde_json::from_str(WORKED).unwrap();
    let control = serde_json::json!({
        "home": cfg["subpopulations"][0],
        "immigrant": cfg["subpopulations"][1],
        "grid": [
            {"family": "uniform", "lower": 0.0, "upper": 0.8},
            {"family": "uniform", "lower": 0.0, "upper": 1.0},
            {"family": "uniform", "lower": 0.0, "upper": 1.5}
        ]
    });
    let v = json(&rdbp(&["transport", "control", "--config", &write(dir.path(), "k.json", &control.to_string())]));
    let ranked = v.as_array().unwrap();
    assert!(!ranked.is_empty());
    let costs: Vec<f64> = ranked.iter().map(|r| r["cost"].as_f64().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[0] <= w[1]));
    // the source law itself costs nothing to reach
    if let Some(same) = ranked.iter().find(|r| r["index"] == 1) {
        assert_eq!(same["cost"].as_f64().unwrap(), 0.0);
    }
}
