use std::process::{Command, Output};

use serde_json::Value;

fn ghzkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghzkit"))
        .args(args)
        .env_remove("GHZKIT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = ghzkit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

#[test]
fn exact_witness_on_ideal_state() {
    let r = report(&["witness", "--n", "3", "--d", "3", "--visibility", "1", "--exact"]);
    assert!((f(&r["result"]["exact"]["w"]) - 2.0).abs() < 1e-9);
    assert_eq!(f(&r["result"]["exact"]["threshold"]), 5.0 / 3.0);
    assert_eq!(r["manifest"]["command"], "witness");
    assert!(r["manifest"]["config"]["witness"]["exact"].as_bool().unwrap());
}

#[test]
fn sampled_four_qutrit_witness() {
    let r = report(&["witness", "--n", "4", "--d", "3", "--visibility", "0.902", "--shots-total", "2404", "--seed", "7"]);
    let expected = 2.0 * 0.902 + 0.098 * (10.0 / 27.0);
    let w = f(&r["result"]["estimate"]["w"]);
    let sigma = f(&r["result"]["stderr"]);
    assert!((w - expected).abs() <= 3.0 * sigma, "{w} vs {expected} (sigma {sigma})");
    assert_eq!(r["result"]["totals"]["computational_total"], 1202);
    assert_eq!(r["manifest"]["seed"], 7);
}

#[test]
fn witness_critical_visibility() {
    let r = report(&["witness", "--n", "4", "--d", "3", "--critical-visibility"]);
    assert!((f(&r["result"]["critical_visibility"]) - 0.79545).abs() < 1e-5);
}

#[test]
fn bell_ideal_and_noisy() {
    let r = report(&["bell"]);
    assert!((f(&r["result"]["value"]) - 9.0).abs() < 1e-9);
    assert_eq!(r["result"]["tier"]["dims"], serde_json::json!([2, 3, 3]));

    let r = report(&["bell", "--visibility", "0.5"]);
    assert!((f(&r["result"]["value"]) - 6.0).abs() < 1e-9);
    assert_eq!(r["result"]["tier"]["tier"], "no_violation");
}

#[test]
fn bell_sampled_near_model_value() {
    let r = report(&["bell", "--visibility", "0.883", "--shots-total", "10143", "--seed", "11"]);
    let value = f(&r["result"]["value"]);
    let sigma = f(&r["result"]["stderr"]);
    assert!((value - (3.0 + 6.0 * 0.883)).abs() <= 3.0 * sigma, "{value}");
    assert!(sigma > 0.02 && sigma < 0.03);
}

#[test]
fn bell_sampled_at_tuned_visibility_beats_qutrit_pair_bound() {
    // exact value 8.302
    let v = format!("{}", 5.302 / 6.0);
    let mut significant = 0;
    for seed in 0..20 {
        let r = report(&["bell", "--visibility", &v, "--shots-total", "10143", "--seed", &seed.to_string()]);
        let link = r["result"]["bounds"].as_array().unwrap().iter().find(|b| b["dims"] == serde_json::json!([2, 3, 3])).cloned().unwrap();
        significant += usize::from(f(&link["significance"]["p_value"]) < 1e-2);
        assert!(f(&r["result"]["value"]) > 7.584);
    }
    assert!(significant >= 8, "{significant}/20 seeds below 1e-2");
}

#[test]
fn sampling_requires_seed() {
    let out = ghzkit(&["witness", "--shots-total", "100"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_identical_apart_from_wall_time() {
    let args = ["bell", "--visibility", "0.9", "--shots-total", "900", "--seed", "5"];
    let mut a = report(&args);
    let mut b = report(&args);
    a["manifest"]["wall_time_s"] = Value::Null;
    b["manifest"]["wall_time_s"] = Value::Null;
    assert_eq!(a, b);
}

#[test]
fn lhv_default() {
    let r = report(&["lhv"]);
    assert_eq!(f(&r["result"]["value"]), 7.0);
    assert_eq!(r["result"]["joint_strategies"], 19683);
    assert_eq!(r["result"]["matches_reference"], true);
}

#[test]
fn seesaw_small_profile() {
    let r = report(&["seesaw", "--dims", "2,2,3", "--restarts", "200", "--seed", "1"]);
    assert!((f(&r["result"]["best_value"]) - 7.584).abs() < 5e-3);
    assert!(r["result"]["seesaw"]["best_strategy"]["povms"].is_array());
}

#[test]
fn pvalue_witness_violation() {
    let r = report(&["pvalue", "--observed", "1.849", "--bound", "1.6667", "--scale", "2", "--counts", "1142"]);
    let p = f(&r["result"]["report"]["p_value"]);
    assert!((p.log10() + 18.0).abs() <= 1.0, "{p:e}");
}

#[test]
fn optics_default_and_unrealizable() {
    let r = report(&["optics", "--trigger"]);
    assert!((f(&r["result"]["report"]["postselected"]["success_probability"]) - 1.0 / 3.0).abs() < 1e-9);
    assert!((f(&r["result"]["report"]["triggered"]["ghz_fidelity"]) - 1.0).abs() < 1e-9);
    assert_eq!(ghzkit(&["optics", "--overlaps", "1,1,0"]).status.code(), Some(2));
}

#[test]
fn optics_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("circuit.json");
    std::fs::write(
        &path,
        r#"{"dim": 3, "sources": [{"photons": ["a", "b"]}, {"photons": ["c", "d"]}],
            "exchanges": [{"first": "b", "second": "c", "layer": 1}, {"first": "b", "second": "d", "layer": 2}],
            "overlaps": {"bc": 0.974, "bd": 0.996, "cd": 0.981}}"#,
    )
    .unwrap();
    let r = report(&["optics", "--config", path.to_str().unwrap()]);
    let fid = f(&r["result"]["report"]["postselected"]["ghz_fidelity"]);
    assert!(fid < 1.0 && fid > 0.98);
    std::fs::write(&path, "{\"dim\": 3, \"bogus\": 1}").unwrap();
    assert_eq!(ghzkit(&["optics", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn functional_round_trip_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("default.bell");
    let r = report(&["functional", "--write", path.to_str().unwrap()]);
    assert_eq!(r["result"]["supported_settings"], 9);
    let r = report(&["lhv", "--functional", path.to_str().unwrap()]);
    assert_eq!(f(&r["result"]["value"]), 7.0);
    std::fs::write(&path, "scenario 3 3\n").unwrap();
    assert_eq!(ghzkit(&["lhv", "--functional", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn missing_files_are_io_errors() {
    assert_eq!(ghzkit(&["bell", "--functional", "/nonexistent/f.bell"]).status.code(), Some(4));
}

#[test]
fn csv_tables_and_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("counts.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_ghzkit"))
        .args(["witness", "--shots-total", "1142", "--seed", "1", "--csv", csv.to_str().unwrap()])
        .env("GHZKIT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("witness.json")).unwrap()).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("s0,s1,s2,o0,o1,o2,value"));
    let total: u64 = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 1142);
    assert_eq!(report["result"]["significance"]["N"], 1142);
    assert_eq!(ghzkit(&["lhv", "--csv", csv.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_config_status() {
    assert_eq!(ghzkit(&["witness", "--visibility", "1.5"]).status.code(), Some(2));
    assert_eq!(ghzkit(&["seesaw", "--dims", "1,2,2"]).status.code(), Some(2));
    assert_eq!(ghzkit(&["pvalue", "--observed", "1", "--bound", "3", "--scale", "2", "--counts", "5"]).status.code(), Some(2));
    assert_eq!(ghzkit(&["witness", "--exact", "--damping", "1,1,0"]).status.code(), Some(2));
    assert_eq!(ghzkit(&["nonsense"]).status.code(), Some(2));
}
