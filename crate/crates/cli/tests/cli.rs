use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const PROBABILITY_TOLERANCE: f64 = 1e-9;

fn sse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sse-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn train_golden(out: &Path) {
    let cfg = fixture("golden_run.json");
    let o = sse(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--max-features",
        "32",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_lists_every_subcommand_and_flag() {
    let o = sse(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for sub in [
        "extract-features",
        "fit-embeddings",
        "train",
        "predict",
        "evaluate",
        "sweep",
        "rank",
        "synth",
    ] {
        assert!(text.contains(sub), "missing {sub}");
    }
    let o = sse(&["train", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for flag in [
        "--config",
        "--seed",
        "--out-dir",
        "--corpus",
        "--embeddings",
        "--max-features",
    ] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn exit_codes_follow_error_class() {
    assert_eq!(sse(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        sse(&["train", "--config", "/nonexistent/run.json"])
            .status
            .code(),
        Some(1)
    );

    let dir = scratch("codes");
    let bad = dir.join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": 1}\n").unwrap();
    let out = dir.join("f.jsonl");
    let o = sse(&[
        "extract-features",
        "--corpus",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn predictions_match_frozen_golden() {
    let dir = scratch("golden");
    train_golden(&dir);
    let preds = dir.join("pred.jsonl");
    let o = sse(&[
        "predict",
        "--model",
        dir.join("model").to_str().unwrap(),
        "--corpus",
        fixture("golden_corpus.jsonl").to_str().unwrap(),
        "--out",
        preds.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let got = std::fs::read_to_string(&preds).unwrap();
    let want = std::fs::read_to_string(fixture("golden_predictions.jsonl")).unwrap();
    assert_eq!(got.lines().count(), want.lines().count());
    for (g, w) in got.lines().zip(want.lines()) {
        let g: Value = serde_json::from_str(g).unwrap();
        let w: Value = serde_json::from_str(w).unwrap();
        for (key, wv) in w.as_object().unwrap() {
            let gv = &g[key];
            match (gv.as_f64(), wv.as_f64()) {
                (Some(a), Some(b)) => {
                    assert!((a - b).abs() <= PROBABILITY_TOLERANCE, "{key}: {a} vs {b}")
                }
                _ => assert_eq!(gv, wv, "{key} of {}", w["id"]),
            }
        }
    }
}

#[test]
fn evaluate_report_is_self_consistent() {
    let dir = scratch("evaluate");
    train_golden(&dir);
    let report = dir.join("report.json");
    let o = sse(&[
        "evaluate",
        "--model",
        dir.join("model").to_str().unwrap(),
        "--corpus",
        fixture("golden_corpus.jsonl").to_str().unwrap(),
        "--split",
        dir.join("split.json").to_str().unwrap(),
        "--part",
        "test",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();

    let mut sums = [0.0; 4];
    for label in r["per_label"].as_array().unwrap() {
        let c = &label["confusion"];
        let [tp, tn, fp, fn_] = ["tp", "tn", "fp", "fn"].map(|k| c[k].as_f64().unwrap());
        let n = tp + tn + fp + fn_;
        assert_eq!(n, r["n_documents"].as_f64().unwrap());
        let acc = (tp + tn) / n;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        let mcc = if denom > 0.0 {
            (tp * tn - fp * fn_) / denom
        } else {
            0.0
        };
        for (i, v) in [acc, f1, mcc, (mcc + 1.0) / 2.0].into_iter().enumerate() {
            sums[i] += v;
        }
    }
    let m = &r["macro"];
    for (i, key) in ["accuracy", "f1", "mcc", "tmcc"].iter().enumerate() {
        let reported = m[key].as_f64().unwrap();
        assert!(
            (reported - sums[i] / 4.0).abs() < 1e-12,
            "{key}: {reported} vs {}",
            sums[i] / 4.0
        );
    }
}

#[test]
fn second_run_on_locked_directory_is_refused() {
    let dir = scratch("lock");
    std::fs::write(dir.join(".sse.lock"), "1\n").unwrap();
    let cfg = fixture("golden_run.json");
    let o = sse(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.join("model").exists());
}

#[test]
fn rank_reports_friedman_per_metric() {
    let dir = scratch("rank");
    let scores = dir.join("scores.csv");
    std::fs::write(
        &scores,
        "run,model,accuracy,f1,tmcc\n\
         r1,a,0.9,0.9,0.9\nr1,b,0.8,0.8,0.8\nr1,c,0.7,0.7,0.7\n\
         r2,a,0.9,0.9,0.9\nr2,b,0.8,0.8,0.8\nr2,c,0.7,0.7,0.7\n\
         r3,a,0.9,0.9,0.9\nr3,b,0.8,0.8,0.8\nr3,c,0.7,0.7,0.7\n",
    )
    .unwrap();
    let o = sse(&["rank", "--scores", scores.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    for metric in ["accuracy", "f1", "tmcc"] {
        assert_eq!(r[metric]["statistic"].as_f64().unwrap(), 6.0);
    }
    assert_eq!(r["overall_rank"], serde_json::json!([1.0, 2.0, 3.0]));
}
