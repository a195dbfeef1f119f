use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tcl_mfc::experiment::{prepare, read_summary, ExperimentConfig, ARTIFACTS};
use tcl_mfc::mdp::PolicySequence;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tcl-mfc"))
}

fn base_config(out: &Path) -> Value {
    json!({
        "horizon": 144,
        "drain_seed": 3,
        "deviation": "one-hour",
        "solver": "md-mfc",
        "solver_config": {"iterations": 10, "step_constant": 1.5},
        "fleet_size": 300,
        "sim_seed": 5,
        "output_dir": out,
    })
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&Path], sub: &str) -> Output {
    bin().arg(sub).args(args).output().unwrap()
}

fn summary_value(dir: &Path, key: &str) -> String {
    read_summary(dir.join("summary.txt"))
        .unwrap()
        .into_iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("{key} missing"))
        .1
}

fn read_policy(path: &Path, nx: usize, horizon: usize) -> PolicySequence {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let mut p_on = vec![vec![0.0; nx]; horizon + 1];
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let n: usize = rec[0].parse().unwrap();
        let x: usize = rec[1].parse().unwrap();
        let p: f64 = rec[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        p_on[n][x] = p;
    }
    PolicySequence::from_fn(nx, 2, horizon, |n, x| vec![1.0 - p_on[n][x], p_on[n][x]]).unwrap()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

#[test]
fn sample_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let out = run(&[&path], "validate");
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stdout));
        count += 1;
    }
    assert!(count >= 5);
}

#[test]
fn validate_reports_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let dev = tmp.path().join("dev.csv");
    let mut text = String::from("step,deviation\n");
    for n in 0..144 {
        text.push_str(&format!("{n},{}\n", if n == 10 { 0.1 } else { 0.0 }));
    }
    std::fs::write(&dev, text).unwrap();
    let mut cfg = base_config(tmp.path());
    cfg["t_min"] = json!(70);
    cfg["deviation"] = json!("custom");
    cfg["deviation_file"] = json!(dev);
    let path = write_config(tmp.path(), "bad.json", &cfg);
    let out = run(&[&path], "validate");
    assert_eq!(out.status.code(), Some(1));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("t_min (70) must be below t_max (65)"), "{report}");
    assert!(report.contains("nonzero energy"), "{report}");
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base_config(tmp.path());
    cfg.as_object_mut().unwrap().remove("deviation");
    let path = write_config(tmp.path(), "missing.json", &cfg);
    let out = run(&[&path], "run");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("deviation"));

    let mut cfg = base_config(tmp.path());
    cfg["solver_confg"] = json!({});
    let path = write_config(tmp.path(), "typo.json", &cfg);
    let out = run(&[&path], "run");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver_confg"));
}

#[test]
fn unreadable_files_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[&tmp.path().join("absent.json")], "run");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nominal_trace_equals_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base_config(tmp.path());
    cfg["solver"] = json!("nominal");
    cfg["fleet_size"] = json!(0);
    let path = write_config(tmp.path(), "nominal.json", &cfg);
    let out = run(&[&path], "run");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = tmp.path().join("trace.csv");
    assert_eq!(column(&trace, "mean_consumption"), column(&tmp.path().join("target.csv"), "baseline"));
    assert_eq!(column(&trace, "mean_consumption"), column(&trace, "nominal_consumption"));
    assert_eq!(summary_value(tmp.path(), "objective"), summary_value(tmp.path(), "nominal_objective"));
}

#[test]
fn zero_iterations_report_initial_objective() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base_config(tmp.path());
    cfg["solver_config"]["iterations"] = json!(0);
    let path = write_config(tmp.path(), "k0.json", &cfg);
    assert!(run(&[&path], "run").status.success());
    let prepared = prepare(&ExperimentConfig::load(&path).unwrap()).unwrap();
    let uniform = PolicySequence::uniform(82, 2, 144);
    let want = prepared.problem.policy_cost(&uniform).unwrap();
    let got: f64 = summary_value(tmp.path(), "objective").parse().unwrap();
    assert_eq!(got, want);
}

#[test]
fn summary_objective_matches_exported_policy() {
    for solver in ["md-mfc", "fp-mfg", "omd-mfg", "frank-wolfe"] {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = base_config(tmp.path());
        cfg["solver"] = json!(solver);
        let path = write_config(tmp.path(), "cfg.json", &cfg);
        let out = run(&[&path], "run");
        assert!(out.status.success(), "{solver}: {}", String::from_utf8_lossy(&out.stderr));
        for name in ARTIFACTS {
            assert!(tmp.path().join(name).exists(), "{solver}: {name}");
        }
        let prepared = prepare(&ExperimentConfig::load(&path).unwrap()).unwrap();
        let policy = read_policy(&tmp.path().join("policy.csv"), 82, 144);
        let recomputed = prepared.problem.policy_cost(&policy).unwrap();
        let reported: f64 = summary_value(tmp.path(), "objective").parse().unwrap();
        assert!((recomputed - reported).abs() <= 1e-9, "{solver}: {recomputed} vs {reported}");
        let hist = column(&tmp.path().join("history.csv"), "objective");
        assert_eq!(hist.len(), 11, "{solver}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = base_config(&tmp.path().join("out"));
    let path = write_config(tmp.path(), "cfg.json", &cfg);
    assert!(run(&[&path], "run").status.success());
    let first: Vec<Vec<u8>> = ARTIFACTS.iter().map(|a| std::fs::read(tmp.path().join("out").join(a)).unwrap()).collect();
    assert!(run(&[&path], "run").status.success());
    for (a, bytes) in ARTIFACTS.iter().zip(first) {
        assert_eq!(std::fs::read(tmp.path().join("out").join(a)).unwrap(), bytes, "{a}");
    }
}

#[test]
fn synth_drain_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("drain.csv");
    let status = bin().args(["synth-drain", "4"]).arg(&out).status().unwrap();
    assert!(status.success());
    let p = tcl_mfc::heater::load_drain_profile(&out).unwrap();
    assert_eq!(p.len(), 144);
    let mut cfg = base_config(tmp.path());
    cfg.as_object_mut().unwrap().remove("drain_seed");
    cfg["drain_file"] = json!("drain.csv");
    cfg["fleet_size"] = json!(0);
    let path = write_config(tmp.path(), "file.json", &cfg);
    let out = run(&[&path], "run");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
