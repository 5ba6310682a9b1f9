use std::path::{Path, PathBuf};
use std::process::Command;

use dst_eval::cli::run;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn gold() -> String {
    fixture("hypothetical_gold.json").display().to_string()
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
fn dst(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("dst-eval").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn corpus_row(csv: &str) -> Vec<String> {
    let line = csv.lines().find(|l| l.starts_with("__corpus__")).expect("corpus row");
    line.split(',').map(str::to_owned).collect()
}

#[test]
fn evaluate_hypothetical_p1() {
    let p1 = fixture("hypothetical_p1.json").display().to_string();
    let (code, out, err) = dst(&["evaluate", "--gold", &gold(), "--pred", &p1, "--format", "csv"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("dialogue_id,turns,jga,sa,aga,rsa,fga,gca,missed,wrong,overshot,correct\n"));
    let row = corpus_row(&out);
    assert_eq!(&row[2..], ["0.8333", "0.9167", "0.9167", "0.9167", "0.8333", "0.6667", "1", "0", "0", "1"]);
}

#[test]
fn evaluate_percent_json() {
    let p2 = fixture("hypothetical_p2.json").display().to_string();
    let (code, out, _) = dst(&["evaluate", "--gold", &gold(), "--pred", &p2, "--percent"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["scale"], "percent");
    assert_eq!(v["corpus"]["jga"].as_f64(), Some(0.0));
    assert_eq!(v["corpus"]["rsa"].as_f64(), Some(8.3333));
    assert_eq!(v["corpus"]["fga"].as_f64(), Some(59.7507));
    assert_eq!(v["corpus"]["gca"].as_f64(), Some(66.6667));
    assert_eq!(v["per_dialogue"][0]["dialogue_id"], "h1");
    assert!(out.contains("\"jga\": 0.0000"), "fixed decimals in raw output");
}

#[test]
fn perturb_at_zero_rate_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("p.json");
    let pred_s = pred.display().to_string();
    let (code, _, err) = dst(&["perturb", "--gold", &gold(), "--error-rate", "0", "--out", &pred_s]);
    assert_eq!(code, 0, "{err}");
    let (code, out, _) = dst(&["evaluate", "--gold", &gold(), "--pred", &pred_s, "--format", "csv"]);
    assert_eq!(code, 0);
    assert!(corpus_row(&out)[2..8].iter().all(|s| s == "1.0000"), "{out}");
}

#[test]
fn perturb_is_deterministic_and_seed_sensitive() {
    let args = |seed: &'static str| {
        vec!["perturb", "--gold", "", "--error-rate", "0.5", "--tail-bias", "-2", "--seed", seed]
    };
    let g = gold();
    let go = |seed| {
        let mut a = args(seed);
        a[2] = &g;
        dst(&a)
    };
    let (c1, a, _) = go("3");
    let (_, b, _) = go("3");
    assert_eq!(c1, 0);
    assert_eq!(a, b);
    let outs: std::collections::HashSet<String> = ["1", "2", "3", "4", "5", "6"].iter().map(|s| go(s).1).collect();
    assert!(outs.len() > 1);
}

#[test]
fn compare_systems_and_metrics() {
    let p1 = fixture("hypothetical_p1.json").display().to_string();
    let p2 = fixture("hypothetical_p2.json").display().to_string();
    let (code, out, _) = dst(&[
        "compare", "--gold", &gold(), "--pred-a", &p1, "--pred-b", &p2, "--metric", "jga", "--top", "1",
        "--format", "csv",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "rank,dialogue_id,jga_a,jga_b,gap\n1,h1,0.8333,0.0000,0.8333\n");

    let (code, out, _) = dst(&["compare", "--gold", &gold(), "--pred-a", &p2, "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(out, "rank,dialogue_id,fga,gca,gap\n1,h1,0.5975,0.6667,0.0692\n");
}

#[test]
fn analyze_reports_traits() {
    let p2 = fixture("hypothetical_p2.json").display().to_string();
    let (code, out, _) = dst(&["analyze", "--gold", &gold(), "--pred", &p2, "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(out, "dialogue_id,turns,mistakes,tail_orientation,non_uniformity\nh1,6,1,-0.4167,10.0000\n");
}

#[test]
fn validation_errors_exit_one_with_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"format_version":1,"predictions":{"h1":[{"Hotel Area":"x"}],"zz":[]}}"#).unwrap();
    let (code, _, err) = dst(&["validate", "--gold", &gold(), "--pred", &bad.display().to_string()]);
    assert_eq!(code, 1);
    assert!(err.contains("error[E_LENGTH]"), "{err}");
    assert!(err.contains("error[E_SLOT_NAME]"), "{err}");
    assert!(err.contains("error[E_UNKNOWN_ID]"), "{err}");

    let (code, _, err) = dst(&["evaluate", "--gold", "/nonexistent/gold.json", "--pred", &gold()]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[E_IO]"), "{err}");

    std::fs::write(&bad, "{\"format_version\": 1,\n \"dialogues\": [").unwrap();
    let (code, _, err) = dst(&["validate", "--gold", &bad.display().to_string()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let p1 = fixture("hypothetical_p1.json").display().to_string();
    assert_eq!(dst(&["frobnicate"]).0, 2);
    assert_eq!(dst(&["evaluate", "--gold", &gold()]).0, 2);
    let (code, _, err) = dst(&["evaluate", "--gold", &gold(), "--pred", &p1, "--format", "xml"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error[E_USAGE]"), "{err}");
    assert_eq!(dst(&["evaluate", "--gold", &gold(), "--pred", &p1, "--lambda", "0"]).0, 2);
    assert_eq!(dst(&["evaluate", "--gold", &gold(), "--pred", &p1, "--aggregate", "median"]).0, 2);
    assert_eq!(dst(&["--help"]).0, 0);
}

#[test]
fn binary_reads_config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("dst.toml");
    std::fs::write(&config, "[metrics]\nlambda = 1.0\n").unwrap();
    let p2 = fixture("hypothetical_p2.json");
    let output = Command::new(env!("CARGO_BIN_EXE_dst-eval"))
        .args(["evaluate", "--format", "csv", "--gold"])
        .arg(fixture("hypothetical_gold.json"))
        .arg("--pred")
        .arg(&p2)
        .env("DST_EVAL_CONFIG", &config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let out = String::from_utf8(output.stdout).unwrap();
    // Larger lambda forgives propagated turns faster.
    let fga: f64 = corpus_row(&out)[6].parse().unwrap();
    let expected = (1..=5).map(|d| 1.0 - (-(d as f64)).exp()).sum::<f64>() / 6.0;
    assert!((fga - expected).abs() < 1e-4, "{fga} vs {expected}");

    let status = Command::new(env!("CARGO_BIN_EXE_dst-eval")).arg("bogus").output().unwrap().status;
    assert_eq!(status.code(), Some(2));
}
