//! End-to-end checks of the `crosslex` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn crosslex() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crosslex"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn crosslex");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn gen_synth(dir: &Path, n: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = dir.join("synth.jsonl");
    let truth = dir.join("truth.json");
    run_ok(crosslex().args([
        "synth",
        "gen",
        "--n",
        &n.to_string(),
        "--out",
        data.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--seed",
        "7",
    ]));
    (data, truth)
}

#[test]
fn synth_split_and_rank_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, truth) = gen_synth(tmp.path(), 300);

    let splits = tmp.path().join("splits");
    run_ok(crosslex().args([
        "split",
        "--in",
        data.to_str().unwrap(),
        "--out-dir",
        splits.to_str().unwrap(),
    ]));
    assert!(splits.join("train.jsonl").exists());
    assert!(splits.join("dev.jsonl").exists());
    assert!(splits.join("test.jsonl").exists());

    // zero-noise synthetic data: the rule ranker puts gold at rank 1
    let ranks = tmp.path().join("ranks.tsv");
    run_ok(crosslex().args([
        "rank",
        "--method",
        "rule",
        "--queries",
        splits.join("test.jsonl").to_str().unwrap(),
        "--universe",
        data.to_str().unwrap(),
        "--pool-size",
        "40",
        "--query-limit",
        "10",
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        ranks.to_str().unwrap(),
    ]));
    let tsv = fs::read_to_string(&ranks).unwrap();
    let rank1_scores: Vec<&str> = tsv
        .lines()
        .skip(1)
        .filter(|l| l.split('\t').nth(1) == Some("1"))
        .collect();
    assert_eq!(rank1_scores.len(), 10);
    for line in rank1_scores {
        let score: f64 = line.split('\t').nth(3).unwrap().parse().unwrap();
        assert_eq!(score, 1.0, "gold not exact at rank 1: {line}");
    }
}

#[test]
fn translit_and_metrics_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let words = tmp.path().join("words.txt");
    fs::write(&words, "об\nкитоб\n").unwrap();
    let out = tmp.path().join("translit.txt");
    run_ok(crosslex().args([
        "translit",
        "--in",
        words.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next().unwrap(), "آب");

    let pairs = tmp.path().join("pairs.tsv");
    fs::write(&pairs, "abc\tabc\nabc\tabd\n").unwrap();
    let scores = tmp.path().join("scores.csv");
    run_ok(crosslex().args([
        "metrics",
        "--pairs",
        pairs.to_str().unwrap(),
        "--out",
        scores.to_str().unwrap(),
    ]));
    let csv = fs::read_to_string(&scores).unwrap();
    assert!(csv.starts_with("hyp,ref,cer,chrf\n"));
    assert!(csv.contains("abc,abc,0.000,1.000"));
}

#[test]
fn reproduce_writes_artifacts_and_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, truth) = gen_synth(tmp.path(), 400);
    let out_dir = tmp.path().join("artifacts");
    run_ok(crosslex().args([
        "reproduce",
        "--dataset",
        data.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--pool",
        "40",
        "--tune-pool",
        "15",
        "--bpe-vocab",
        "100",
        "--dim",
        "12",
        "--epochs",
        "1",
        "--query-limit",
        "25",
    ]));
    for artifact in
        ["manifest.json", "retrieval.csv", "retrieval.md", "ocr.csv", "weights.json", "stats.csv"]
    {
        assert!(out_dir.join(artifact).exists(), "missing {artifact}");
    }

    // a missing dataset path must fail without writing artifacts
    let out2 = tmp.path().join("nope_artifacts");
    let status = crosslex()
        .args([
            "reproduce",
            "--dataset",
            tmp.path().join("missing.jsonl").to_str().unwrap(),
            "--out-dir",
            out2.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(!out2.join("retrieval.csv").exists());

    // bare usage error: no arguments at all
    let usage = crosslex().arg("reproduce").output().unwrap();
    assert!(!usage.status.success());
}
