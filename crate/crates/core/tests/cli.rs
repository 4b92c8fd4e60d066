use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn clustmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clustmix"))
        .args(args)
        .env_remove("CLUSTMIX_THREADS")
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn toy(dir: &Path, kind: &str, n: usize, seed: u64) -> String {
    let out = path(dir, &format!("{kind}_{seed}.csv"));
    let o = clustmix(&["toy", "--kind", kind, "--n", &n.to_string(), "--seed", &seed.to_string(), "--output", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn calibrate_round_trip_through_the_cli() {
    let sigma = json(&clustmix(&[
        "calibrate", "--epsilon", "1", "--delta", "1e-5", "--l", "100", "--classes", "1", "--features", "2", "--json",
    ]));
    for key in ["sigma_min", "epsilon", "delta", "C", "D"] {
        assert!(sigma.get(key).is_some(), "missing {key}");
    }
    let s = sigma["sigma_min"].as_f64().unwrap();
    assert!((s - 0.052_759_098_541_748_165).abs() < 1e-9);
    let l = json(&clustmix(&[
        "calibrate", "--epsilon", "1", "--delta", "1e-5", "--sigma-max", &s.to_string(), "--classes", "1", "--features", "2",
        "--json",
    ]));
    assert_eq!(l["l_min"].as_u64(), Some(100));
}

#[test]
fn calibrate_rejects_bad_budgets() {
    let o = clustmix(&["calibrate", "--epsilon", "-1", "--delta", "0.1", "--l", "5", "--classes", "1", "--features", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = clustmix(&["calibrate", "--epsilon", "1", "--delta", "1.5", "--l", "5", "--classes", "1", "--features", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = clustmix(&["calibrate", "--epsilon", "1", "--delta", "0.1", "--classes", "1", "--features", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_lists_exit_codes() {
    let o = clustmix(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("Exit codes") && text.contains("CLUSTMIX_THREADS"));
    for sub in ["calibrate", "synthesize", "evaluate", "pipeline", "toy"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn synthesize_writes_matching_schema_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path(), "blobs", 300, 1);
    let output = path(dir.path(), "synth.csv");
    let report = path(dir.path(), "report.json");
    let o = clustmix(&[
        "synthesize", "--input", &input, "--label-column", "label", "--output", &output, "--report", &report, "--epsilon",
        "10", "--seed", "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = |p: &str| fs::read_to_string(p).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header(&output), header(&input));

    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let synthesis = &r["synthesis"];
    let records = synthesis["records"].as_array().unwrap();
    let rows = fs::read_to_string(&output).unwrap().lines().count() - 1;
    assert_eq!(records.len(), rows);
    assert_eq!(synthesis["record_count"].as_u64().unwrap() as usize, rows);
    for rec in records {
        assert!(rec["l"].as_u64().is_some() && rec["sigma"].as_f64().is_some());
    }
    assert_eq!(synthesis["realized_privacy"]["epsilon"].as_f64(), Some(10.0));
    assert!(synthesis["realized_privacy"]["delta_max"].as_f64().unwrap() <= synthesis["realized_privacy"]["delta_target"].as_f64().unwrap());

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(path(dir.path(), "report.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"].as_u64(), Some(3));
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn synthesize_is_byte_identical_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path(), "moons", 400, 2);
    let run = |tag: &str, seed: &str| -> (Vec<u8>, Vec<u8>) {
        let out = path(dir.path(), &format!("s_{tag}.csv"));
        let rep = path(dir.path(), &format!("r_{tag}.json"));
        let o = clustmix(&[
            "synthesize", "--input", &input, "--label-column", "label", "--output", &out, "--report", &rep, "--seed", seed,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(out).unwrap(), fs::read(rep).unwrap())
    };
    let a = run("a", "5");
    let b = run("b", "5");
    let c = run("c", "6");
    assert_eq!(a.0, b.0);
    assert_ne!(a.0, c.0);
    // report embeds the output path, so compare with it normalised
    let norm = |bytes: &[u8], tag: &str| String::from_utf8_lossy(bytes).replace(&format!("_{tag}."), "_X.");
    assert_eq!(norm(&a.1, "a"), norm(&b.1, "b"));
}

#[test]
fn infeasible_budget_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path(), "blobs", 40, 0);
    let o = clustmix(&[
        "synthesize", "--input", &input, "--label-column", "label", "--output", &path(dir.path(), "o.csv"), "--report",
        &path(dir.path(), "r.json"), "--epsilon", "0.01", "--delta", "1e-9", "--sigma-max", "0.01",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path(), "blobs", 40, 0);
    let out = path(dir.path(), "o.csv");
    let rep = path(dir.path(), "r.json");
    let missing = clustmix(&["synthesize", "--input", "/nonexistent.csv", "--label-column", "label", "--output", &out, "--report", &rep]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_label = clustmix(&["synthesize", "--input", &input, "--label-column", "nope", "--output", &out, "--report", &rep]);
    assert_eq!(bad_label.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_label.stderr).contains("nope"));
    let cfg = path(dir.path(), "cfg.json");
    fs::write(&cfg, r#"{"sigma": 0.1}"#).unwrap();
    let bad_cfg = clustmix(&["synthesize", "--input", &input, "--label-column", "label", "--config", &cfg, "--output", &out, "--report", &rep]);
    assert_eq!(bad_cfg.status.code(), Some(2));
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path(), "blobs", 300, 4);
    let cfg = path(dir.path(), "cfg.json");
    fs::write(
        &cfg,
        r#"{"privacy": {"epsilon": 5, "delta": 0.001}, "n_slices": 1, "sigma_max_grid": [0.1, 0.3], "alpha": 1.0, "seed": 9}"#,
    )
    .unwrap();
    let rep = path(dir.path(), "r.json");
    let o = clustmix(&[
        "synthesize", "--input", &input, "--label-column", "label", "--config", &cfg, "--output", &path(dir.path(), "o.csv"),
        "--report", &rep,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(rep).unwrap()).unwrap();
    assert_eq!(r["config"]["seed"].as_u64(), Some(9));
    assert_eq!(r["synthesis"]["realized_privacy"]["delta_target"].as_f64(), Some(0.001));
    assert_eq!(r["synthesis"]["selection"]["candidates"].as_array().unwrap().len(), 2);
    assert_eq!(r["synthesis"]["diagnostics"]["adapt_ran"].as_bool(), Some(false));
}

fn split_files(dir: &Path, input: &str) -> (PathBuf, PathBuf) {
    let text = fs::read_to_string(input).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let rows: Vec<&str> = lines.collect();
    let (mut train, mut test) = (vec![header.to_string()], vec![header.to_string()]);
    for (i, r) in rows.iter().enumerate() {
        if i % 4 == 0 { &mut test } else { &mut train }.push(r.to_string());
    }
    let (a, b) = (dir.join("train.csv"), dir.join("test.csv"));
    fs::write(&a, train.join("\n") + "\n").unwrap();
    fs::write(&b, test.join("\n") + "\n").unwrap();
    (a, b)
}

#[test]
fn evaluate_identity_has_zero_gap_for_each_metric() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path(), "moons", 300, 3);
    let (train, test) = split_files(dir.path(), &input);
    let (train, test) = (train.to_string_lossy().into_owned(), test.to_string_lossy().into_owned());
    for metric in ["auc", "accuracy", "ovo-auc"] {
        let r = json(&clustmix(&[
            "evaluate", "--train", &train, "--test", &test, "--synthetic", &train, "--label-column", "label", "--metric",
            metric, "--json",
        ]));
        assert_eq!(r["utility"]["gap"].as_f64(), Some(0.0), "{metric}");
        assert_eq!(r["utility"]["metric"].as_str(), Some(metric));
    }
}

#[test]
fn evaluate_names_the_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path(), "moons", 100, 3);
    let (train, test) = split_files(dir.path(), &input);
    let broken = dir.path().join("synthetic.csv");
    let text: String = fs::read_to_string(&train)
        .unwrap()
        .lines()
        .map(|l| l.split(',').skip(1).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(&broken, text).unwrap();
    let o = clustmix(&[
        "evaluate",
        "--train",
        &train.to_string_lossy(),
        "--test",
        &test.to_string_lossy(),
        "--synthetic",
        &broken.to_string_lossy(),
        "--label-column",
        "label",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("x0"));
}

#[test]
fn pipeline_reports_each_method_at_matched_budget() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path(), "moons", 400, 8);
    let single = json(&clustmix(&["pipeline", "--input", &input, "--label-column", "label", "--json"]));
    assert_eq!(single["summary"].as_array().unwrap().len(), 1);

    let both = json(&clustmix(&[
        "pipeline", "--input", &input, "--label-column", "label", "--seeds", "0,1", "--baseline", "--epsilon", "2", "--json",
    ]));
    let summary = both["summary"].as_array().unwrap();
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[0]["epsilon"], summary[1]["epsilon"]);
    assert_eq!(summary[0]["delta"], summary[1]["delta"]);
    assert_eq!(both["runs"].as_array().unwrap().len(), 2);
    for run in both["runs"].as_array().unwrap() {
        for res in run["results"].as_array().unwrap() {
            assert_eq!(res["synthesis"]["realized_privacy"]["epsilon"].as_f64(), Some(2.0));
        }
    }
}

#[test]
fn thread_cap_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_clustmix"))
        .args(["calibrate", "--epsilon", "1", "--delta", "1e-5", "--l", "10", "--classes", "1", "--features", "1"])
        .env("CLUSTMIX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_clustmix"))
        .args(["calibrate", "--epsilon", "1", "--delta", "1e-5", "--l", "10", "--classes", "1", "--features", "1"])
        .env("CLUSTMIX_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
}
