use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prescriptive_alarms::estimator::load_external_scores;
use prescriptive_alarms::optimize::{cv_objective, default_tau_grid};
use prescriptive_alarms::policy::Policy;
use prescriptive_alarms::MultiAlarmCostModel;
use serde_json::Value;
use tempfile::TempDir;

fn ppm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppm-alarms")).arg("--out-dir").arg(dir).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> Value {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const COST_MODEL: &str = r#"{
  "alarms": [{"id": "alarm", "c_in": {"family": "constant", "base": 1.0},
              "c_com": {"family": "constant", "base": 1.0}, "eff": {"kind": "linear_decay"}}],
  "c_out": {"family": "constant", "base": 5.0}
}"#;

/// synth + split into `dir`; returns the cost-model path.
fn prepare(dir: &Path, n_cases: &str, seed: &str) -> PathBuf {
    ok(&ppm(dir, &["--seed", seed, "synth", "--n-cases", n_cases, "--signal", "0.6"]));
    ok(&ppm(
        dir,
        &[
            "--seed",
            seed,
            "split",
            "--log",
            p(&dir.join("synthetic_log.csv")),
            "--schema",
            p(&dir.join("synthetic_schema.json")),
        ],
    ));
    let model = dir.join("cost_model.json");
    fs::write(&model, COST_MODEL).unwrap();
    model
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|path| (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap()))
        .collect()
}

#[test]
fn split_of_hundred_cases_is_64_16_20() {
    let dir = TempDir::new().unwrap();
    prepare(dir.path(), "100", "1");
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("split_manifest.json")).unwrap()).unwrap();
    let m = &manifest["manifest"];
    assert_eq!((m["n_train"].as_u64(), m["n_thres"].as_u64(), m["n_test"].as_u64()), (Some(64), Some(16), Some(20)));
    assert_eq!(manifest["seed"], 1);
}

#[test]
fn missing_schema_exits_2_naming_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    let out = ppm(dir.path(), &["split", "--log", "log.csv", "--schema", p(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"no_such_key": 1}"#).unwrap();
    let out = ppm(dir.path(), &["--config", p(&cfg), "split"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_class_training_exits_3() {
    let dir = TempDir::new().unwrap();
    ok(&ppm(dir.path(), &["--seed", "4", "synth", "--n-cases", "60", "--class-ratio", "0.0001"]));
    ok(&ppm(
        dir.path(),
        &[
            "split",
            "--log",
            p(&dir.path().join("synthetic_log.csv")),
            "--schema",
            p(&dir.path().join("synthetic_schema.json")),
        ],
    ));
    let out = ppm(dir.path(), &["score"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_scores_are_outcomes() {
    let dir = TempDir::new().unwrap();
    prepare(dir.path(), "80", "2");
    ok(&ppm(dir.path(), &["score", "--oracle"]));
    let series = load_external_scores(fs::File::open(dir.path().join("scores_test.csv")).unwrap()).unwrap();
    assert!(!series.is_empty());
    for s in series {
        let expected = if s.outcome { 1.0 } else { 0.0 };
        assert!(s.probs.iter().all(|&p| p == expected));
    }
}

#[test]
fn external_scores_bypass_training() {
    let dir = TempDir::new().unwrap();
    let ext = dir.path().join("ext.csv");
    fs::write(&ext, "case_id,prefix_len,probability,outcome,trace_len\na,1,0.2,1,2\na,2,0.9,1,2\nb,1,0.1,0,1\n")
        .unwrap();
    let summary = ok(&ppm(dir.path(), &["score", "--external-thres", p(&ext), "--external-test", p(&ext)]));
    assert_eq!(summary["estimator"], "external");
    assert!(!dir.path().join("model.json").exists());
    let back = load_external_scores(fs::File::open(dir.path().join("scores_thres.csv")).unwrap()).unwrap();
    assert_eq!(back.len(), 2);
}

#[test]
fn optimize_matches_brute_force_grid_on_oracle_scores() {
    let dir = TempDir::new().unwrap();
    let model_path = prepare(dir.path(), "120", "3");
    ok(&ppm(dir.path(), &["score", "--oracle"]));
    let summary =
        ok(&ppm(dir.path(), &["--seed", "11", "optimize", "--cost-model", p(&model_path), "--family", "basic"]));
    let series = load_external_scores(fs::File::open(dir.path().join("scores_thres.csv")).unwrap()).unwrap();
    let model: MultiAlarmCostModel = serde_json::from_str(COST_MODEL).unwrap();
    let brute = default_tau_grid()
        .into_iter()
        .map(|tau| cv_objective(&series, &model, &Policy::Basic { tau }, 11).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(summary["cv_mean_cost"].as_f64().unwrap(), brute);
    let result: Value = serde_json::from_slice(&fs::read(dir.path().join("optimize_result.json")).unwrap()).unwrap();
    assert_eq!(result["seed"], 11);
    assert_eq!(result["config"]["search"]["cv_seed"], 11);
}

#[test]
fn never_baseline_has_zero_benefit() {
    let dir = TempDir::new().unwrap();
    let model_path = prepare(dir.path(), "80", "5");
    ok(&ppm(dir.path(), &["score", "--oracle"]));
    let summary = ok(&ppm(dir.path(), &["evaluate", "--cost-model", p(&model_path), "--baseline", "never"]));
    assert_eq!(summary["benefit"].as_f64(), Some(0.0));
    assert_eq!(summary["f_score"].as_f64(), Some(0.0));
}

#[test]
fn rq1_has_six_configurations() {
    let dir = TempDir::new().unwrap();
    ok(&ppm(dir.path(), &["--seed", "6", "synth", "--n-cases", "200"]));
    let scores = dir.path().join("posterior_scores.csv");
    let summary = ok(&ppm(dir.path(), &["rq", "--rq", "RQ1", "--thres", p(&scores), "--test", p(&scores)]));
    assert_eq!(summary["cells"], 6);
    let csv = fs::read_to_string(dir.path().join("rq1.csv")).unwrap();
    let optimized = csv.lines().skip(1).filter(|l| l.contains(",optimized,")).count();
    assert_eq!(optimized, 6);
}

#[test]
fn rq_with_missing_score_file_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = ppm(dir.path(), &["rq", "--rq", "RQ2", "--thres", "missing.csv", "--test", "missing.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn full_pipeline_is_byte_identical_on_rerun() {
    let dir = TempDir::new().unwrap();
    let run = || {
        let model_path = prepare(dir.path(), "150", "9");
        ok(&ppm(dir.path(), &["--seed", "9", "score", "--n-rounds", "10"]));
        ok(&ppm(
            dir.path(),
            &["--seed", "9", "optimize", "--cost-model", p(&model_path), "--family", "delayed", "--max-kappa", "3"],
        ));
        ok(&ppm(dir.path(), &["--seed", "9", "evaluate", "--cost-model", p(&model_path)]));
        snapshot(dir.path())
    };
    let first = run();
    let second = run();
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        assert!(bytes == &second[name], "{name} differs between runs");
    }
    assert!(first.contains_key("decisions.csv") && first.contains_key("evaluation.json"));
}
