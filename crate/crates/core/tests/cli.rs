mod common;

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use common::markov_dataset;

fn seqrec(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqrec")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// A prepared dataset in `dir/data`, built from a small TSV log.
fn prepared(dir: &Path) -> PathBuf {
    let (seqs, _) = markov_dataset(120, 25, 8, 0);
    let log: String = seqs
        .iter()
        .flat_map(|s| s.items.iter().enumerate().map(move |(t, i)| format!("{}\t{}\t{}\n", s.user, i, t)))
        .collect();
    std::fs::write(dir.join("log.tsv"), log).unwrap();
    let summary = ok(seqrec(
        &["prepare", "--input", "log.tsv", "--format", "tsv", "--min-count", "1", "--max-len", "6", "--out", "data"],
        dir,
    ));
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["users"], 120);
    dir.join("data")
}

const TINY: [&str; 10] = ["--layers", "1", "--hidden", "16", "--heads", "2", "--epochs", "1", "--lr", "0.003"];

#[test]
fn train_distill_and_eval_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepared(dir);
    let mut args = vec!["train", "--data", "data/dataset.srds", "--out", "teacher.srkd", "--log", "t.csv"];
    args.extend(TINY);
    let history: serde_json::Value = serde_json::from_str(&ok(seqrec(&args, dir))).unwrap();
    assert_eq!(history["epochs"].as_array().unwrap().len(), 1);
    assert!(std::fs::read_to_string(dir.join("t.csv")).unwrap().starts_with("epoch,step,loss,metric\n"));

    std::fs::write(dir.join("student.conf"), "# student\nalpha = 0.3\ntemperature = 2\n").unwrap();
    let mut args = vec!["distill", "--config", "student.conf", "--data", "data/dataset.srds", "--teacher", "teacher.srkd", "--out", "student.srkd"];
    args.extend(TINY);
    ok(seqrec(&args, dir));

    ok(seqrec(
        &["eval", "--checkpoint", "student.srkd", "--data", "data/dataset.srds", "--ks", "1,10", "--out", "report.json"],
        dir,
    ));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["split"], "test");
    assert_eq!(report["users"], 120);
    let hr10 = report["metrics"]["HR@10"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&hr10));
    assert!(report["metrics"]["NDCG@1"].as_f64().unwrap() <= hr10);
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepared(dir);
    let out = seqrec(
        &["distill", "--data", "data/dataset.srds", "--teacher", "none.srkd", "--out", "s.srkd", "--alpha", "1.2"],
        dir,
    );
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "parameter");

    assert_eq!(seqrec(&["frobnicate"], dir).status.code(), Some(2));
    let missing = seqrec(&["eval", "--checkpoint", "none.srkd", "--data", "data/dataset.srds"], dir);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn serve_answers_health_and_recommendations() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepared(dir);
    let mut args = vec!["train", "--data", "data/dataset.srds", "--out", "m.srkd"];
    args.extend(TINY);
    ok(seqrec(&args, dir));
    let mut child = Command::new(env!("CARGO_BIN_EXE_seqrec"))
        .args(["serve", "--checkpoint", "m.srkd", "--tokenmap", "data/tokenmap.json", "--port", "0"])
        .current_dir(dir)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = serde_json::from_str::<serde_json::Value>(&line).unwrap()["listening"].as_str().unwrap().to_string();

    let map: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("data/tokenmap.json")).unwrap()).unwrap();
    let known = [map["items"][0].as_str().unwrap(), map["items"][1].as_str().unwrap()];
    let health = ureq::get(&format!("http://{addr}/healthz")).call().unwrap().body_mut().read_to_string().unwrap();
    let rec: serde_json::Value = ureq::post(&format!("http://{addr}/recommend"))
        .send_json(serde_json::json!({ "items": [known[0], known[1], "unknown"], "k": 3 }))
        .unwrap()
        .body_mut()
        .read_json()
        .unwrap();
    let bad = ureq::post(&format!("http://{addr}/recommend"))
        .send_json(serde_json::json!({ "items": ["unknown"] }));
    child.kill().unwrap();
    child.wait().unwrap();

    assert_eq!(health, "ok");
    assert_eq!(rec["items"].as_array().unwrap().len(), 3);
    assert_eq!(rec["dropped_unknown"], 1);
    assert!(matches!(bad, Err(ureq::Error::StatusCode(422))));
}
