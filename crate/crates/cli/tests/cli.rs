use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_omissis-forge"));
    cmd.env_remove("OMISSIS_FORGE_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, docs: &str, seed: &str) -> PathBuf {
    let syn = dir.join("syn");
    ok(&["synth", "--output", p(&syn), "--docs", docs, "--realistic", "--seed", seed]);
    syn
}

fn pipeline(syn: &Path, out: &Path, extra: &[&str]) -> Output {
    let result = bin()
        .arg("pipeline")
        .arg("--clear")
        .arg(syn.join("clear"))
        .arg("--obf")
        .arg(syn.join("obf"))
        .arg("--vocab")
        .arg(syn.join("vocab.txt"))
        .arg("--gold")
        .arg(syn.join("gold.jsonl"))
        .arg("--output")
        .arg(out)
        .args(["--seed", "3"])
        .args(extra)
        .output()
        .unwrap();
    assert!(result.status.success(), "pipeline failed: {}", String::from_utf8_lossy(&result.stderr));
    result
}

fn doc_ids(chunks: &[Value]) -> BTreeSet<u64> {
    chunks.iter().map(|c| c["doc_id"].as_u64().unwrap()).collect()
}

#[test]
fn pipeline_recovers_gold_on_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "50", "3");
    let out = dir.path().join("out");
    pipeline(&syn, &out, &["--threshold", "0.8"]);

    let report = json(&out.join("gold_report.json"));
    assert_eq!(report["gold_documents"], 50);
    assert_eq!(report["mismatched_tokens"], 0);
    let exact = report["exact_documents"].as_u64().unwrap();
    assert!(exact >= 45, "only {exact} documents recovered");
    assert_eq!(report["metrics"]["f1"], 1.0);

    let truth: BTreeMap<u64, u64> = jsonl(&syn.join("truth.jsonl"))
        .iter()
        .map(|t| (t["clear_id"].as_u64().unwrap(), t["obf_id"].as_u64().unwrap()))
        .collect();
    for pair in jsonl(&out.join("pairs.jsonl")) {
        assert_eq!(truth[&pair["clear_id"].as_u64().unwrap()], pair["obf_id"].as_u64().unwrap());
    }

    let chunks = jsonl(&out.join("chunks.jsonl"));
    let train = jsonl(&out.join("train.jsonl"));
    let eval = jsonl(&out.join("eval.jsonl"));
    assert_eq!(train.len() + eval.len(), chunks.len());
    let (train_docs, eval_docs) = (doc_ids(&train), doc_ids(&eval));
    assert!(train_docs.is_disjoint(&eval_docs));
    let n = (train_docs.len() + eval_docs.len()) as f64;
    assert!((train_docs.len() as f64 - 0.8 * n).abs() <= 2.0);
    for c in &chunks {
        assert_eq!(c["input_ids"].as_array().unwrap().len(), 512);
        let keys: Vec<&str> = c.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["attention_mask", "chunk_index", "doc_id", "input_ids", "labels", "token_type_ids"]);
    }

    let stats = json(&out.join("stats.json"));
    assert_eq!(
        stats["doc_count"].as_u64().unwrap(),
        report["gold_documents"].as_u64().unwrap() - report["missing_documents"].as_array().unwrap().len() as u64
    );
    let weights = json(&out.join("weights.json"));
    assert_eq!(weights["weights"].as_array().unwrap().len(), 3);
}

#[test]
fn default_threshold_never_mislabels_what_it_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "30", "8");
    let out = dir.path().join("out");
    pipeline(&syn, &out, &[]);
    let report = json(&out.join("gold_report.json"));
    assert_eq!(report["mismatched_tokens"], 0);
    let unmatched = jsonl(&out.join("unmatched.jsonl"));
    let pairs = jsonl(&out.join("pairs.jsonl"));
    assert_eq!(pairs.len() + unmatched.len(), 30);
    for u in unmatched {
        assert_eq!(u["reason"], "no_match");
    }
}

#[test]
fn subcommands_compose_to_the_pipeline_output() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "12", "5");
    let whole = dir.path().join("whole");
    pipeline(&syn, &whole, &["--threshold", "0.8"]);

    let s = dir.path().join("steps");
    let f = |name: &str| s.join(name);
    ok(&[
        "ingest",
        "--clear",
        p(&syn.join("clear")),
        "--obf",
        p(&syn.join("obf")),
        "--output",
        p(&f("corpus.jsonl")),
        "--report",
        p(&f("ingest_report.jsonl")),
    ]);
    ok(&[
        "match",
        "--input",
        p(&f("corpus.jsonl")),
        "--output",
        p(&f("pairs.jsonl")),
        "--candidates",
        p(&f("candidates.jsonl")),
        "--unmatched",
        p(&f("unmatched.jsonl")),
        "--threshold",
        "0.8",
        "--seed",
        "3",
    ]);
    ok(&[
        "align",
        "--input",
        p(&f("corpus.jsonl")),
        "--pairs",
        p(&f("pairs.jsonl")),
        "--output",
        p(&f("aligned.jsonl")),
    ]);
    ok(&["annotate", "--input", p(&f("aligned.jsonl")), "--output", p(&f("bio.jsonl"))]);
    ok(&[
        "encode",
        "--input",
        p(&f("bio.jsonl")),
        "--vocab",
        p(&syn.join("vocab.txt")),
        "--output",
        p(&f("chunks.jsonl")),
    ]);
    ok(&["split", "--input", p(&f("chunks.jsonl")), "--output", p(&s), "--seed", "3"]);
    ok(&["stats", "--input", p(&f("bio.jsonl")), "--output", p(&f("stats.json"))]);
    ok(&["weights", "--input", p(&f("train.jsonl")), "--output", p(&f("weights.json"))]);

    for name in [
        "corpus.jsonl",
        "ingest_report.jsonl",
        "candidates.jsonl",
        "pairs.jsonl",
        "unmatched.jsonl",
        "aligned.jsonl",
        "bio.jsonl",
        "chunks.jsonl",
        "train.jsonl",
        "eval.jsonl",
        "stats.json",
        "weights.json",
    ] {
        assert_eq!(fs::read(whole.join(name)).unwrap(), fs::read(f(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "15", "9");
    let again = dir.path().join("syn2");
    ok(&["synth", "--output", p(&again), "--docs", "15", "--realistic", "--seed", "9"]);
    assert_eq!(fs::read(syn.join("corpus.jsonl")).unwrap(), fs::read(again.join("corpus.jsonl")).unwrap());
    assert_eq!(fs::read(syn.join("vocab.txt")).unwrap(), fs::read(again.join("vocab.txt")).unwrap());

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    pipeline(&syn, &a, &["--threshold", "0.8"]);
    let out = bin()
        .env("OMISSIS_FORGE_THREADS", "1")
        .args(["pipeline", "--clear", p(&syn.join("clear")), "--obf", p(&syn.join("obf"))])
        .args(["--vocab", p(&syn.join("vocab.txt")), "--gold", p(&syn.join("gold.jsonl"))])
        .args(["--output", p(&b), "--seed", "3", "--threshold", "0.8"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 13);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?} differs");
    }
}

#[test]
fn weights_for_reference_frequencies() {
    let out = ok(&["weights", "--freq", "135604247,737890,399903"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let w: Vec<f64> = v["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (got, want) in w.iter().zip([0.33, 61.77, 113.97]) {
        assert!((got - want).abs() <= 0.01, "{got} vs {want}");
    }
    assert_eq!(v["frequencies"], serde_json::json!([135604247, 737890, 399903]));
    assert_eq!(run(&["weights", "--freq", "5,0,1"]).status.code(), Some(2));
}

#[test]
fn evaluate_scores_a_prediction_dump() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "10", "4");
    let out = dir.path().join("out");
    pipeline(&syn, &out, &["--threshold", "0.8"]);

    // A perfect dump for the eval split, then one that predicts O everywhere.
    let eval = jsonl(&out.join("eval.jsonl"));
    let dump = |perfect: bool| {
        eval.iter()
            .map(|c| {
                let pred: Vec<i64> = c["labels"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|l| if perfect { l.as_i64().unwrap().max(0) } else { 0 })
                    .collect();
                serde_json::json!({"doc_id": c["doc_id"], "chunk_index": c["chunk_index"], "pred": pred}).to_string()
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let perfect = dir.path().join("perfect.jsonl");
    fs::write(&perfect, dump(true)).unwrap();
    let report = dir.path().join("metrics.json");
    ok(&[
        "evaluate",
        "--input",
        p(&perfect),
        "--gold",
        p(&out.join("eval.jsonl")),
        "--weights",
        p(&out.join("weights.json")),
        "--output",
        p(&report),
    ]);
    let m = json(&report);
    let keys: BTreeSet<&str> = m.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, BTreeSet::from(["accuracy", "precision", "recall", "f1", "per_class_f1", "weights"]));
    assert_eq!((m["accuracy"].as_f64(), m["f1"].as_f64()), (Some(1.0), Some(1.0)));
    assert_eq!(m["weights"], json(&out.join("weights.json"))["weights"]);

    let zeros = dir.path().join("zeros.jsonl");
    fs::write(&zeros, dump(false)).unwrap();
    let out = ok(&["evaluate", "--input", p(&zeros), "--gold", p(&dir.path().join("out/eval.jsonl"))]);
    let m: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["recall"], 0.0);
    assert_eq!(m["weights"], Value::Null);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert_eq!(run(&["stats", "--input", p(&empty)]).status.code(), Some(2));
    assert_eq!(run(&["stats", "--input", p(&dir.path().join("absent.jsonl"))]).status.code(), Some(2));
    let broken = dir.path().join("broken.jsonl");
    fs::write(&broken, "{\"id\": 0, \"tokens\": [\"a\"], \"tags\": [2]}\n").unwrap();
    assert_eq!(run(&["stats", "--input", p(&broken)]).status.code(), Some(2));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["stats"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["stats", "--input", p(&empty), "--threshold", "1.5"]).status.code(), Some(2));

    let threads = bin().env("OMISSIS_FORGE_THREADS", "zero").args(["weights", "--freq", "1,1,1"]).output().unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn stats_prints_label_rows() {
    let dir = tempfile::tempdir().unwrap();
    let bio = dir.path().join("bio.jsonl");
    fs::write(&bio, "{\"id\":0,\"tokens\":[\"a\",\"b\",\"c\"],\"tags\":[0,0,1]}\n").unwrap();
    let out = ok(&["stats", "--input", p(&bio)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["labels"][0]["total_count"], 2);
    assert_eq!(v["labels"][1]["label"], "B-OMISSIS");
    assert_eq!(v["labels"][1]["average_count_per_document"], 1.0);
    assert_eq!(v["labels"][2]["average_count_per_document"], 0.0);
}
