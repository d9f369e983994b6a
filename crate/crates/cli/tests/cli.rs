use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_futurerand"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn gap_reports_annulus_and_value() {
    let out = run(&["gap", "--k", "64", "--eps", "1"]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["lb"], 16);
    assert_eq!(v["ub"], 31);
    assert!((v["gap"].as_f64().unwrap() - 0.010100653778356969).abs() < 1e-15);

    let bns = json_stdout(&run(&["gap", "--k", "256", "--algo", "bns19"]));
    assert_eq!(bns["annulus"], serde_json::json!([95, 161]));
}

#[test]
fn simulate_writes_summary_csv_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let reports = dir.path().join("reports.ndjson");
    let out = run(&[
        "simulate", "--n", "500", "--d", "32", "--k", "4", "--eps", "1", "--beta", "0.1", "--algo",
        "futurerand", "--reps", "3", "--seed", "9", "--out", out_dir.to_str().unwrap(), "--emit-reports",
        reports.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    for key in ["spec", "gap", "bound", "regime_ok", "reps", "summary"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    assert_eq!(summary["reps"].as_array().unwrap().len(), 3);
    for key in ["mean", "stddev", "quantiles"] {
        assert!(summary["summary"].get(key).is_some(), "{key}");
    }

    let csv = fs::read_to_string(out_dir.join("per_t.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,f,fhat,abs_err,bound"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 32);
    for r in &rows {
        assert!(((r[2] - r[1]).abs() - r[3]).abs() < 1e-6);
    }

    // Replaying the emitted records must reproduce the rep-0 estimates.
    let replay = run(&[
        "estimate", "--records", reports.to_str().unwrap(), "--n", "500", "--d", "32", "--k", "4", "--eps", "1",
    ]);
    assert!(replay.status.success());
    let replayed: Vec<f64> = String::from_utf8(replay.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let direct: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    assert_eq!(replayed, direct);
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--n", "300", "--d", "16", "--k", "3", "--reps", "2", "--seed", "4"];
    let a = json_stdout(&run(&args));
    let b = json_stdout(&run(&args));
    assert_eq!(a["reps"], b["reps"]);
    assert_eq!(a["trajectory"], b["trajectory"]);
}

#[test]
fn audits_pass_and_fail_with_exit_codes() {
    let ok = run(&["audit", "randomizer", "--k", "6", "--eps", "0.5"]);
    assert_eq!(ok.status.code(), Some(0));
    let v = json_stdout(&ok);
    assert_eq!(v["pass"], true);
    assert!(v["max_ratio"].as_f64().unwrap() <= 0.5f64.exp());
    for key in ["epsilon", "max_ratio", "pass", "worst_case"] {
        assert!(v.get(key).is_some());
    }

    let client = run(&[
        "audit", "client", "--d", "4", "--k", "2", "--eps", "1", "--stream-a", "0,1,0,-1", "--stream-b", "0,0,0,0",
    ]);
    assert_eq!(client.status.code(), Some(0));
    assert_eq!(json_stdout(&client)["worst_case"]["input_a"].as_array().unwrap().len(), 4);

    let sweep = run(&["audit", "client", "--d", "4", "--k", "2", "--eps", "0.5", "--algo", "naive"]);
    assert_eq!(sweep.status.code(), Some(0));
    assert_eq!(json_stdout(&sweep)["pairs"], 55);

    // ε̃ = 1 on three coordinates with no annulus is 3-DP, not 1-DP.
    let bad = run(&["audit", "randomizer", "--k", "3", "--eps", "1", "--eps-tilde", "1"]);
    assert_eq!(bad.status.code(), Some(3));
    assert_eq!(json_stdout(&bad)["pass"], false);
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        &["gap", "--k", "64", "--eps", "2"][..],
        &["simulate", "--n", "10", "--d", "12", "--k", "2"],
        &["simulate", "--n", "10", "--d", "16", "--k", "2", "--algo", "laplace"],
        &["audit", "client", "--d", "16", "--k", "2"],
        &["audit", "randomizer", "--k", "4", "--algo", "naive"],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn scaling_emits_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scaling.json");
    let out = run(&[
        "scaling", "--n", "2000", "--d", "32", "--reps", "2", "--k-grid", "2,8,32", "--algos",
        "futurerand,naive", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 6);
    assert_eq!(table["slopes"].as_array().unwrap().len(), 2);
}
