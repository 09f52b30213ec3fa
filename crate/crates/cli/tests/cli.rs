use std::path::Path;
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;
use tierprice_cli::REPORT_SCHEMA;

const TRUTH: [(&str, &str); 5] =
    [("--a", "1.2"), ("--b", "0.03"), ("--gamma0", "0.6"), ("--gamma1", "0.4"), ("--sigma-mu", "1.5")];

fn tierprice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tierprice")).args(args).output().unwrap()
}

fn truth_args() -> Vec<&'static str> {
    TRUTH.iter().flat_map(|(k, v)| [*k, *v]).collect()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = tierprice(&all);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn assert_valid(report: &Value) {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let compiled = JSONSchema::compile(&schema).unwrap();
    if let Err(errors) = compiled.validate(report) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("schema violations: {msgs:#?}");
    };
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn simulated_csv(dir: &Path) -> String {
    let mut args = vec!["simulate"];
    args.extend(truth_args());
    args.extend(["--control", "10,10"]);
    let out = tierprice(&args);
    assert!(out.status.success());
    write(dir, "sim.csv", &String::from_utf8(out.stdout).unwrap())
}

#[test]
fn every_report_matches_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulated_csv(dir.path());

    let mut sim = vec!["simulate"];
    sim.extend(truth_args());
    assert_valid(&json(&sim));
    sim.extend(["--count", "5000", "--seed", "3"]);
    assert_valid(&json(&sim));

    assert_valid(&json(&["stats", &csv]));
    sim.extend(["--control", "10,10"]);
    let sampled = tierprice(&sim);
    let sampled = write(dir.path(), "sampled.csv", &String::from_utf8(sampled.stdout).unwrap());
    let est = json(&["estimate", &sampled, "--starts", "4", "--bootstrap", "2"]);
    assert_valid(&est);
    let est_path = write(dir.path(), "est.json", &est.to_string());
    assert_valid(&json(&["optimize", "--from", &est_path]));
    let mut opt = vec!["optimize", "--data-prices", "10,10"];
    opt.extend(truth_args());
    assert_valid(&json(&opt));
    for name in ["airline", "scenario1", "scenario2"] {
        let report = json(&["scenario", name]);
        assert_valid(&report);
        assert_eq!(report["failed"], 0, "{name}");
    }
}

#[test]
fn simulate_then_estimate_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulated_csv(dir.path());
    let est = json(&["estimate", &csv]);
    let p = &est["result"]["params"];
    for (key, (_, v)) in ["a", "b", "gamma0", "gamma1", "sigma_mu"].iter().zip(TRUTH) {
        let truth: f64 = v.parse().unwrap();
        let got = p[key].as_f64().unwrap();
        assert!((got - truth).abs() <= 1e-3 * truth.abs().max(1.0), "{key}: {got} vs {truth}");
    }
}

#[test]
fn runs_are_deterministic() {
    let mut sim = vec!["simulate", "--count", "2000", "--seed", "9"];
    sim.extend(truth_args());
    assert_eq!(tierprice(&sim).stdout, tierprice(&sim).stdout);
    let a = json(&["scenario", "scenario1"]);
    let b = json(&["scenario", "scenario1"]);
    assert_eq!(a, b);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    // usage and bad input
    assert_eq!(tierprice(&["scenario", "nope"]).status.code(), Some(2));
    assert_eq!(tierprice(&["optimize"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "market_id,kind,version,price,share,count\nc,control,1,10,1.5,\n");
    assert_eq!(tierprice(&["stats", &bad]).status.code(), Some(2));
    // missing file
    assert_eq!(tierprice(&["stats", "/nonexistent/cells.csv"]).status.code(), Some(1));
    // inversion cannot converge within one iteration
    let csv = simulated_csv(dir.path());
    let out = tierprice(&["estimate", &csv, "--contraction-max-iter", "1", "--inversion", "contraction"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "seed = 4\n[params]\na = 1.2\nb = 0.03\ngamma0 = 0.6\ngamma1 = 0.4\nsigma_mu = 1.5\n[design]\ncontrol = [10, 10]\n",
    );
    let from_file = json(&["simulate", "--config", &cfg]);
    assert_eq!(from_file["params"]["gamma1"], 0.4);
    assert_eq!(from_file["rows"][0]["price"], 10.0);
    let overridden = json(&["simulate", "--config", &cfg, "--gamma1", "-0.2"]);
    assert_eq!(overridden["params"]["gamma1"], -0.2);
    assert_eq!(overridden["params"]["a"], 1.2);

    let unknown = write(dir.path(), "bad.toml", "[params]\nalpha = 1\n");
    let out = tierprice(&["simulate", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.alpha"));
}

#[test]
fn airline_stats_read_negligible_discrimination() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "airline.csv", tierprice::io::dataset("airline").unwrap().csv);
    let report = json(&["stats", &csv]);
    let phi = report["stats"]["phi"].as_array().unwrap();
    assert_eq!(phi.len(), 2);
    assert!(phi.iter().all(|r| (0.9..=1.2).contains(&r["phi"].as_f64().unwrap())));
    assert!(report["stats"]["pricing_readout"].as_str().unwrap().contains("negligible"));
    let table = String::from_utf8(tierprice(&["stats", &csv]).stdout).unwrap();
    assert!(table.contains("differential response"));
}

#[test]
fn control_only_file_reports_share_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "c.csv", "market_id,kind,version,price,share,count\nc,control,1,10,0.1,\nc,control,2,10,0.3,\n");
    let report = json(&["stats", &csv]);
    assert_valid(&report);
    assert_eq!(report["stats"]["psi"].as_array().unwrap().len(), 0);
    assert_eq!(report["stats"]["phi"].as_array().unwrap().len(), 0);
    let ratio = report["stats"]["ratios"][0]["ratio"].as_f64().unwrap();
    assert!((ratio - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn output_path_receives_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let mut args = vec!["optimize", "--format", "json", "--out", path.to_str().unwrap()];
    args.extend(truth_args());
    let out = tierprice(&args);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["command"], "optimize");
}
