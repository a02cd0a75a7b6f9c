use std::fs;
use std::path::PathBuf;

use omissis_forge::record_store::{clean_encoding, normalize_whitespace, CorpusStore, ExtractorHooks, Variant};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct NfcRow {
    input: String,
    nfc: String,
}

#[test]
fn composition_matches_reference_normalizer() {
    // Expected values were produced by Python's unicodedata.normalize("NFC").
    let rows: Vec<NfcRow> = serde_json::from_str(include_str!("fixtures/nfc_sample.json")).unwrap();
    assert_eq!(rows.len(), 100);
    for row in rows {
        assert_eq!(clean_encoding(row.input.as_bytes()), row.nfc, "input {:?}", row.input);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn normalization_is_idempotent(s in "[ \t\r\na-zé\u{a0}]{0,40}") {
        let once = normalize_whitespace(&s);
        prop_assert_eq!(normalize_whitespace(&once), once.clone());
        prop_assert!(!once.contains("  ") && !once.contains(['\t', '\n', '\r']));
        prop_assert_eq!(once.trim(), once.as_str());
    }

    #[test]
    fn cleaning_yields_control_free_text(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let out = clean_encoding(&bytes);
        prop_assert!(out.chars().all(|c| c == '\t' || c == '\n' || !c.is_control()));
    }
}

fn write_corpus(dir: &std::path::Path) -> Vec<PathBuf> {
    let files = [
        ("b.txt", "secondo  documento\n\tnr. 2/B".as_bytes()),
        ("a.txt", b"primo documento nr. 1/A".as_slice()),
        ("c.txt", b"terzo \xff documento"),
    ];
    files
        .iter()
        .map(|(name, body)| {
            let p = dir.join(name);
            fs::write(&p, body).unwrap();
            p
        })
        .collect()
}

#[test]
fn ingest_assigns_ids_in_filename_order() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let (store, report) =
        CorpusStore::ingest(&[dir.path().to_path_buf()], Variant::Clear, &ExtractorHooks::new()).unwrap();
    assert!(report.skipped.is_empty());
    let names: Vec<(u64, &str)> = store.iter().map(|r| (r.id, r.filename.as_str())).collect();
    assert_eq!(names, vec![(0, "a.txt"), (1, "b.txt"), (2, "c.txt")]);
    assert_eq!(store.get(1).unwrap().text, "secondo documento nr. 2/B");
    assert_eq!(store.get(2).unwrap().text, "terzo documento");
    assert_eq!(store.manifest().clear, 3);
    for r in &store {
        assert_eq!(normalize_whitespace(&r.text), r.text);
    }
}

#[test]
fn ingest_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let run = || {
        let (store, _) =
            CorpusStore::ingest(&[dir.path().to_path_buf()], Variant::Unknown, &ExtractorHooks::new()).unwrap();
        let mut buf = Vec::new();
        store.write_jsonl(&mut buf).unwrap();
        buf
    };
    let first = run();
    assert_eq!(first, run());
    let line = String::from_utf8(first).unwrap().lines().next().unwrap().to_string();
    assert_eq!(line, r#"{"id":0,"filename":"a.txt","text":"primo documento nr. 1/A","variant":"unknown"}"#);
    let back = CorpusStore::read_jsonl(line.as_bytes()).unwrap();
    assert_eq!(back.len(), 1);
}

#[test]
fn unreadable_and_empty_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = write_corpus(dir.path());
    fs::write(dir.path().join("d.txt"), b"real text").unwrap();
    paths.push(dir.path().join("d.txt"));
    paths.push(dir.path().join("missing.txt"));
    let (store, report) = CorpusStore::ingest(&paths, Variant::Clear, &ExtractorHooks::new()).unwrap();
    assert_eq!(store.len(), 4);
    assert_eq!(report.skipped.len(), 1);
    assert!(report.skipped[0].path.ends_with("missing.txt"));
    let ids: Vec<u64> = store.iter().map(|r| r.id).collect();
    assert_eq!(ids, vec![0, 1, 2, 3]);

    fs::write(dir.path().join("blank.txt"), b" \n\t ").unwrap();
    let (_, report) =
        CorpusStore::ingest(&[dir.path().join("blank.txt")], Variant::Clear, &ExtractorHooks::new()).unwrap();
    assert_eq!(report.skipped[0].reason, "empty document");
}

#[cfg(unix)]
#[test]
fn extractor_hook_reads_command_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.fake");
    fs::write(&p, b"ignored").unwrap();
    let mut hooks = ExtractorHooks::new();
    hooks.insert("fake", "echo estratto da {path}");
    let (store, report) = CorpusStore::ingest(std::slice::from_ref(&p), Variant::Clear, &hooks).unwrap();
    assert!(report.skipped.is_empty());
    assert_eq!(store.records()[0].text, format!("estratto da {}", p.display()));

    hooks.insert("fake", "false");
    let (store, report) = CorpusStore::ingest(&[p], Variant::Clear, &hooks).unwrap();
    assert!(store.is_empty());
    assert_eq!(report.skipped.len(), 1);
}

#[test]
fn appended_variants_continue_ids() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let hooks = ExtractorHooks::new();
    let (mut store, _) = CorpusStore::ingest(&[dir.path().join("a.txt")], Variant::Clear, &hooks).unwrap();
    store.append_files(&[dir.path().join("b.txt")], Variant::Obfuscated, &hooks).unwrap();
    assert_eq!(store.get(1).unwrap().variant, Variant::Obfuscated);
    assert_eq!(store.manifest().total(), store.len());
}
