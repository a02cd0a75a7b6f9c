//! Plain-text ingestion into an id-addressed corpus store.
//!
//! Every document becomes a [`DocRecord`] of `(id, filename, text, variant)`.
//! Text is repaired (invalid UTF-8, control characters, Unicode composition)
//! and whitespace-normalized before it is stored, so downstream stages can
//! tokenize by splitting on single spaces.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::jsonl;
use crate::Error;

/// Which side of a clear/redacted pairing a document belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Clear,
    Obfuscated,
    Unknown,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Clear => "clear",
            Variant::Obfuscated => "obfuscated",
            Variant::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// One corpus document. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRecord {
    pub id: u64,
    pub filename: String,
    pub text: String,
    pub variant: Variant,
}

impl DocRecord {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split(' ').filter(|t| !t.is_empty())
    }
}

/// Counts per variant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub clear: usize,
    pub obfuscated: usize,
    pub unknown: usize,
}

impl Manifest {
    pub fn total(&self) -> usize {
        self.clear + self.obfuscated + self.unknown
    }

    fn bump(&mut self, variant: Variant) {
        match variant {
            Variant::Clear => self.clear += 1,
            Variant::Obfuscated => self.obfuscated += 1,
            Variant::Unknown => self.unknown += 1,
        }
    }
}

/// Why a file was left out of the store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

/// Files skipped during ingestion, one entry per file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub skipped: Vec<SkippedFile>,
}

impl IngestReport {
    pub fn write_jsonl<W: Write>(&self, out: W) -> Result<(), Error> {
        jsonl::write_lines(out, &self.skipped)
    }
}

/// Maps a file extension (without the dot, lowercase) to an external command
/// that prints the document text on stdout. `{path}` in the template is
/// replaced by the file path; the template is split on whitespace.
#[derive(Debug, Clone, Default)]
pub struct ExtractorHooks {
    commands: BTreeMap<String, String>,
}

impl ExtractorHooks {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, extension: &str, template: &str) {
        self.commands.insert(extension.trim_start_matches('.').to_lowercase(), template.to_string());
    }

    /// Parses `ext=command template` pairs, e.g. `pdf=pdftotext {path} -`.
    pub fn parse_spec(spec: &str) -> Result<(String, String), Error> {
        let (ext, cmd) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("extractor hook `{spec}` is not ext=command")))?;
        if ext.trim().is_empty() || cmd.trim().is_empty() {
            return Err(Error::InvalidInput(format!("extractor hook `{spec}` is incomplete")));
        }
        Ok((ext.trim().to_string(), cmd.trim().to_string()))
    }

    fn command_for(&self, path: &Path) -> Option<&str> {
        let ext = path.extension()?.to_str()?.to_lowercase();
        self.commands.get(&ext).map(String::as_str)
    }

    fn read(&self, path: &Path) -> Result<Vec<u8>, String> {
        match self.command_for(path) {
            None => std::fs::read(path).map_err(|e| e.to_string()),
            Some(template) => {
                let path_str = path.to_string_lossy();
                let mut parts = template.split_whitespace().map(|p| p.replace("{path}", &path_str));
                let program = parts.next().ok_or_else(|| "empty extractor command".to_string())?;
                let output = Command::new(&program)
                    .args(parts)
                    .output()
                    .map_err(|e| format!("extractor `{program}` failed to start: {e}"))?;
                if !output.status.success() {
                    return Err(format!("extractor `{program}` exited with {}", output.status));
                }
                Ok(output.stdout)
            }
        }
    }
}

/// Decodes arbitrary bytes into clean, NFC-composed UTF-8.
///
/// Each run of invalid bytes becomes one space. C0/C1 control characters
/// other than tab and newline are dropped.
pub fn clean_encoding(raw: &[u8]) -> String {
    let mut decoded = String::with_capacity(raw.len());
    let mut in_invalid_run = false;
    for chunk in raw.utf8_chunks() {
        if !chunk.valid().is_empty() {
            decoded.push_str(chunk.valid());
            in_invalid_run = false;
        }
        if !chunk.invalid().is_empty() && !in_invalid_run {
            decoded.push(' ');
            in_invalid_run = true;
        }
    }
    decoded.nfc().filter(|&c| c == '\t' || c == '\n' || !c.is_control()).collect()
}

/// Collapses every whitespace run to a single space and trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// An immutable corpus: records in ascending id order plus variant counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStore {
    records: Vec<DocRecord>,
    manifest: Manifest,
}

impl CorpusStore {
    /// Builds a store from records, checking that ids are unique. Records are
    /// sorted by id.
    pub fn from_records(mut records: Vec<DocRecord>) -> Result<Self, Error> {
        records.sort_by_key(|r| r.id);
        let mut manifest = Manifest::default();
        for (i, r) in records.iter().enumerate() {
            if i > 0 && records[i - 1].id == r.id {
                return Err(Error::InvalidInput(format!("duplicate document id {}", r.id)));
            }
            manifest.bump(r.variant);
        }
        Ok(Self { records, manifest })
    }

    /// Reads every file under `paths` (files or directories, recursively).
    ///
    /// Ids are assigned from 0 in sorted-path order. Unreadable and empty
    /// documents are skipped and listed in the returned report.
    pub fn ingest(paths: &[PathBuf], variant: Variant, hooks: &ExtractorHooks) -> Result<(Self, IngestReport), Error> {
        let mut store = Self::default();
        let report = store.append_files(paths, variant, hooks)?;
        Ok((store, report))
    }

    /// Ingests more files, continuing the id sequence after the last record.
    pub fn append_files(
        &mut self,
        paths: &[PathBuf],
        variant: Variant,
        hooks: &ExtractorHooks,
    ) -> Result<IngestReport, Error> {
        let files = collect_files(paths)?;
        let loaded: Vec<(PathBuf, Result<String, String>)> = files
            .into_par_iter()
            .map(|path| {
                let text = hooks.read(&path).map(|raw| normalize_whitespace(&clean_encoding(&raw)));
                (path, text)
            })
            .collect();

        let mut report = IngestReport::default();
        let mut next_id = self.records.last().map_or(0, |r| r.id + 1);
        for (path, text) in loaded {
            let shown = path.to_string_lossy().into_owned();
            match text {
                Err(reason) => {
                    log::warn!("skipping unreadable file {shown}: {reason}");
                    report.skipped.push(SkippedFile { path: shown, reason: format!("unreadable: {reason}") });
                }
                Ok(text) if text.is_empty() => {
                    log::warn!("skipping empty document {shown}");
                    report.skipped.push(SkippedFile { path: shown, reason: "empty document".into() });
                }
                Ok(text) => {
                    let filename =
                        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| shown.clone());
                    self.records.push(DocRecord { id: next_id, filename, text, variant });
                    self.manifest.bump(variant);
                    next_id += 1;
                }
            }
        }
        Ok(report)
    }

    pub fn records(&self) -> &[DocRecord] {
        &self.records
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&DocRecord> {
        self.records.binary_search_by_key(&id, |r| r.id).ok().map(|i| &self.records[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DocRecord> {
        self.records.iter()
    }

    pub fn write_jsonl<W: Write>(&self, out: W) -> Result<(), Error> {
        jsonl::write_lines(out, &self.records)
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, Error> {
        Self::from_records(jsonl::read_lines(input)?)
    }
}

impl<'a> IntoIterator for &'a CorpusStore {
    type Item = &'a DocRecord;
    type IntoIter = std::slice::Iter<'a, DocRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

fn collect_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Error> {
    let mut files = Vec::new();
    for root in paths {
        if root.is_dir() {
            for entry in walkdir::WalkDir::new(root).follow_links(true) {
                let entry = entry.map_err(|e| Error::InvalidInput(e.to_string()))?;
                if entry.file_type().is_file() {
                    files.push(entry.into_path());
                }
            }
        } else {
            // Missing plain paths are reported as unreadable, not fatal.
            files.push(root.clone());
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}
