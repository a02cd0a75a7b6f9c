use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use omissis_forge::aligner::{align_matches, AlignConfig, AlignedPair};
use omissis_forge::bio::{is_well_formed, label_stats, to_bio, BioDoc};
use omissis_forge::encoder::{encode_doc, EncodedChunk, EncoderConfig, SpecialTokens, SubwordVocab, VocabOptions};
use omissis_forge::evalkit::{balanced_weights, token_metrics, ClassWeights, MetricsReport};
use omissis_forge::exact_matcher::{match_store, MatchPair, Unmatched};
use omissis_forge::lsh::{sign_records, CandidateList, LshIndex, MinHasher};
use omissis_forge::record_store::{CorpusStore, ExtractorHooks, IngestReport, Variant};
use omissis_forge::split::split_chunks;
use omissis_forge::synth::{generate, Noise, SynthSpec};
use omissis_forge::{Error, PipelineConfig};

use crate::files::{read_json, read_jsonl, reader, write_json, write_jsonl, write_text};
use crate::{Command, IngestSources, NoiseKind, VocabArgs};

pub fn run(command: Command, cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    match command {
        Command::Ingest { sources, input, output, report } => {
            let (store, skipped) = ingest(&sources, &input)?;
            store.write_jsonl(crate::files::writer(&output)?)?;
            if let Some(path) = report {
                skipped.write_jsonl(crate::files::writer(&path)?)?;
            }
            Ok(())
        }
        Command::Match { input, output, candidates, unmatched } => {
            let store = read_store(&input)?;
            let found = find_pairs(&store, cfg)?;
            write_jsonl(&output, &found.pairs)?;
            if let Some(path) = candidates {
                write_jsonl(&path, &found.candidates)?;
            }
            if let Some(path) = unmatched {
                write_jsonl(&path, &found.unmatched)?;
            }
            Ok(())
        }
        Command::Align { input, pairs, output } => {
            let store = read_store(&input)?;
            let pairs: Vec<MatchPair> = read_jsonl(&pairs)?;
            let aligned = align_matches(&store, &pairs, &AlignConfig::with_window(cfg.window))?;
            write_jsonl(&output, &aligned)
        }
        Command::Annotate { input, output } => {
            let aligned: Vec<AlignedPair> = read_jsonl(&input)?;
            write_jsonl(&output, &annotate(&aligned)?)
        }
        Command::Stats { input, output } => {
            let docs = read_bio(&input)?;
            let stats = label_stats(&docs).with_context(|| format!("no documents in {}", input.display()))?;
            write_json(output.as_deref(), &stats.to_report())
        }
        Command::Encode { input, output, vocab } => {
            let docs = read_bio(&input)?;
            let chunks = encode(&docs, &vocab, cfg)?;
            write_jsonl(&output, &chunks)
        }
        Command::Weights { freq, input, output } => {
            let frequencies = match input {
                Some(path) => label_frequencies(&read_jsonl(&path)?),
                None if freq.is_empty() => bail!("give either --freq or --input"),
                None => freq,
            };
            write_json(output.as_deref(), &balanced_weights(&frequencies)?)
        }
        Command::Evaluate { input, gold, weights, output } => {
            let predictions: Vec<Prediction> = read_jsonl(&input)?;
            let gold: Vec<EncodedChunk> = read_jsonl(&gold)?;
            let weights: Option<ClassWeights> = weights.as_deref().map(read_json).transpose()?;
            write_json(output.as_deref(), &evaluate(&predictions, &gold, weights.as_ref())?)
        }
        Command::Synth { output, docs, noise, noise_rate, max_density, realistic } => {
            let base = if realistic { SynthSpec::realistic(docs, cfg.seed) } else { SynthSpec::default() };
            let spec = SynthSpec {
                doc_count: docs,
                noise: match noise {
                    NoiseKind::None => Noise::None,
                    NoiseKind::Insert => Noise::Insert,
                    NoiseKind::Delete => Noise::Delete,
                    NoiseKind::Mixed => Noise::Mixed,
                },
                noise_rate,
                max_density,
                noise_radius: cfg.window,
                seed: cfg.seed,
                ..base
            };
            synth(&spec, &output)
        }
        Command::Pipeline { sources, vocab, output, gold } => pipeline(&sources, &vocab, &output, gold.as_deref(), cfg),
        Command::Split { input, output } => {
            let chunks: Vec<EncodedChunk> = read_jsonl(&input)?;
            let (train, eval) = split_chunks(chunks, cfg.split, cfg.seed)?;
            write_jsonl(&output.join("train.jsonl"), &train)?;
            write_jsonl(&output.join("eval.jsonl"), &eval)
        }
    }
}

fn ingest(sources: &IngestSources, unknown: &[PathBuf]) -> Result<(CorpusStore, IngestReport)> {
    let mut hooks = ExtractorHooks::new();
    for spec in &sources.extractors {
        let (ext, cmd) = ExtractorHooks::parse_spec(spec)?;
        hooks.insert(&ext, &cmd);
    }
    if sources.clear.is_empty() && sources.obf.is_empty() && unknown.is_empty() {
        bail!("nothing to ingest: give --clear, --obf or --input");
    }
    let mut store = CorpusStore::default();
    let mut report = IngestReport::default();
    for (paths, variant) in
        [(&sources.clear[..], Variant::Clear), (&sources.obf[..], Variant::Obfuscated), (unknown, Variant::Unknown)]
    {
        if !paths.is_empty() {
            report.skipped.extend(store.append_files(paths, variant, &hooks)?.skipped);
        }
    }
    if store.is_empty() {
        bail!("no readable documents among the inputs");
    }
    log::info!("ingested {} documents, skipped {}", store.len(), report.skipped.len());
    Ok((store, report))
}

fn read_store(path: &Path) -> Result<CorpusStore> {
    CorpusStore::read_jsonl(reader(path)?).with_context(|| format!("cannot load corpus store {}", path.display()))
}

fn read_bio(path: &Path) -> Result<Vec<BioDoc>> {
    let docs: Vec<BioDoc> = read_jsonl(path)?;
    for d in &docs {
        d.validate().with_context(|| format!("in {}", path.display()))?;
    }
    Ok(docs)
}

struct Found {
    candidates: Vec<CandidateList>,
    pairs: Vec<MatchPair>,
    unmatched: Vec<Unmatched>,
}

fn find_pairs(store: &CorpusStore, cfg: &PipelineConfig) -> Result<Found> {
    if store.is_empty() {
        bail!(Error::EmptyCorpus);
    }
    let hasher = MinHasher::new(cfg.num_perms, cfg.seed)?;
    let signatures = sign_records(store, cfg.shingle_k, &hasher)?;
    let index = LshIndex::build(&signatures, cfg.threshold)?;
    log::info!("LSH with {} bands of {} rows", index.bands(), index.rows());
    let candidates = store.iter().map(|r| index.query(r.id)).collect::<Result<Vec<_>, _>>()?;
    let (pairs, unmatched) = match_store(store, &candidates)?;
    log::info!("{} pairs, {} clear documents unmatched", pairs.len(), unmatched.len());
    Ok(Found { candidates, pairs, unmatched })
}

fn annotate(aligned: &[AlignedPair]) -> Result<Vec<BioDoc>> {
    aligned
        .iter()
        .map(|a| {
            let doc = to_bio(a.clear_id, &a.pairs);
            if !is_well_formed(&doc.tags) || doc.tags.len() != a.pairs.len() {
                return Err(Error::Invariant(format!("document {}: malformed BIO output", a.clear_id)).into());
            }
            Ok(doc)
        })
        .collect()
}

fn load_vocab(args: &VocabArgs) -> Result<SubwordVocab> {
    let opts = VocabOptions { lowercase: args.lowercase, ..VocabOptions::default() };
    SubwordVocab::read(reader(&args.vocab)?, &opts).with_context(|| format!("bad vocabulary {}", args.vocab.display()))
}

fn encode(docs: &[BioDoc], args: &VocabArgs, cfg: &PipelineConfig) -> Result<Vec<EncodedChunk>> {
    let vocab = load_vocab(args)?;
    let special_tokens =
        if args.special_tokens { Some(SpecialTokens::from_vocab(&vocab, "[CLS]", "[SEP]")?) } else { None };
    let enc = EncoderConfig { l_max: cfg.l_max, special_tokens };
    let per_doc = docs
        .par_iter()
        .map(|d| {
            let chunks = encode_doc(d, &vocab, &enc)?;
            for c in &chunks {
                c.validate(cfg.l_max)?;
            }
            Ok(chunks)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(per_doc.into_iter().flatten().collect())
}

/// Counts of labels 0, 1 and 2, ignoring -100.
fn label_frequencies(chunks: &[EncodedChunk]) -> Vec<u64> {
    let mut freq = vec![0u64; 3];
    for label in chunks.iter().flat_map(|c| &c.labels) {
        if let Ok(class) = usize::try_from(*label) {
            if class < 3 {
                freq[class] += 1;
            }
        }
    }
    freq
}

/// One line of a prediction dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: u64,
    pub chunk_index: usize,
    pub pred: Vec<i64>,
}

fn evaluate(
    predictions: &[Prediction],
    gold: &[EncodedChunk],
    weights: Option<&ClassWeights>,
) -> Result<MetricsReport> {
    let by_key: HashMap<(u64, usize), &EncodedChunk> = gold.iter().map(|c| ((c.doc_id, c.chunk_index), c)).collect();
    let mut pred_all = Vec::new();
    let mut gold_all = Vec::new();
    for p in predictions {
        let chunk = by_key
            .get(&(p.doc_id, p.chunk_index))
            .with_context(|| format!("no gold chunk for doc {} chunk {}", p.doc_id, p.chunk_index))?;
        // Dumps may stop at the last real position; the rest is padding.
        if p.pred.len() != chunk.labels.len() && p.pred.len() != chunk.real_len() {
            bail!(
                "doc {} chunk {}: {} predictions for {} positions",
                p.doc_id,
                p.chunk_index,
                p.pred.len(),
                chunk.labels.len()
            );
        }
        pred_all.extend_from_slice(&p.pred);
        pred_all.resize(gold_all.len() + chunk.labels.len(), 0);
        gold_all.extend_from_slice(&chunk.labels);
    }
    if predictions.len() < gold.len() {
        log::warn!("{} gold chunks have no prediction", gold.len() - predictions.len());
    }
    debug_assert_eq!(pred_all.len(), gold_all.len());
    let metrics = token_metrics(&pred_all, &gold_all)?;
    Ok(MetricsReport::new(&metrics, weights))
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthPair {
    clear_id: u64,
    obf_id: u64,
}

fn synth(spec: &SynthSpec, dir: &Path) -> Result<()> {
    let corpus = generate(spec)?;
    for p in &corpus.pairs {
        write_text(&dir.join("clear").join(&p.clear.filename), &p.clear.text)?;
        write_text(&dir.join("obf").join(&p.obf.filename), &p.obf.text)?;
    }
    corpus.store().write_jsonl(crate::files::writer(&dir.join("corpus.jsonl"))?)?;
    write_jsonl(&dir.join("gold.jsonl"), corpus.gold())?;
    let truth: Vec<TruthPair> =
        corpus.pairs.iter().map(|p| TruthPair { clear_id: p.clear.id, obf_id: p.obf.id }).collect();
    write_jsonl(&dir.join("truth.jsonl"), &truth)?;
    let mut vocab = corpus.vocab_tokens().join("\n");
    vocab.push('\n');
    write_text(&dir.join("vocab.txt"), &vocab)
}

/// Recovered tags compared with a gold BIO file, matched by document id.
#[derive(Debug, Serialize)]
struct GoldReport {
    gold_documents: usize,
    missing_documents: Vec<u64>,
    exact_documents: usize,
    tokens: usize,
    mismatched_tokens: usize,
    metrics: Option<MetricsReport>,
}

fn compare_with_gold(predicted: &[BioDoc], gold: &[BioDoc]) -> Result<GoldReport> {
    let by_id: BTreeMap<u64, &BioDoc> = predicted.iter().map(|d| (d.id, d)).collect();
    let mut report = GoldReport {
        gold_documents: gold.len(),
        missing_documents: Vec::new(),
        exact_documents: 0,
        tokens: 0,
        mismatched_tokens: 0,
        metrics: None,
    };
    let mut pred_codes = Vec::new();
    let mut gold_codes = Vec::new();
    for g in gold {
        let Some(p) = by_id.get(&g.id) else {
            report.missing_documents.push(g.id);
            continue;
        };
        if p.tokens != g.tokens {
            bail!("document {}: recovered tokens differ from the gold tokens", g.id);
        }
        let wrong = p.tags.iter().zip(&g.tags).filter(|(a, b)| a != b).count();
        report.tokens += g.tags.len();
        report.mismatched_tokens += wrong;
        report.exact_documents += (wrong == 0) as usize;
        pred_codes.extend(p.codes());
        gold_codes.extend(g.codes());
    }
    if !gold_codes.is_empty() {
        report.metrics = Some(MetricsReport::new(&token_metrics(&pred_codes, &gold_codes)?, None));
    }
    Ok(report)
}

fn pipeline(
    sources: &IngestSources,
    vocab: &VocabArgs,
    dir: &Path,
    gold: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<()> {
    let (store, skipped) = ingest(sources, &[])?;
    store.write_jsonl(crate::files::writer(&dir.join("corpus.jsonl"))?)?;
    skipped.write_jsonl(crate::files::writer(&dir.join("ingest_report.jsonl"))?)?;

    let found = find_pairs(&store, cfg)?;
    write_jsonl(&dir.join("candidates.jsonl"), &found.candidates)?;
    write_jsonl(&dir.join("pairs.jsonl"), &found.pairs)?;
    write_jsonl(&dir.join("unmatched.jsonl"), &found.unmatched)?;
    if found.pairs.is_empty() {
        bail!("no clear document could be paired with a redacted twin");
    }

    let aligned = align_matches(&store, &found.pairs, &AlignConfig::with_window(cfg.window))?;
    write_jsonl(&dir.join("aligned.jsonl"), &aligned)?;
    let docs = annotate(&aligned)?;
    write_jsonl(&dir.join("bio.jsonl"), &docs)?;

    let chunks = encode(&docs, vocab, cfg)?;
    write_jsonl(&dir.join("chunks.jsonl"), &chunks)?;
    let (train, eval) = split_chunks(chunks, cfg.split, cfg.seed)?;
    write_jsonl(&dir.join("train.jsonl"), &train)?;
    write_jsonl(&dir.join("eval.jsonl"), &eval)?;

    // Weights come from the training side only.
    match balanced_weights(&label_frequencies(&train)) {
        Ok(w) => write_json(Some(&dir.join("weights.json")), &w)?,
        Err(e @ Error::ZeroFrequency(_)) => log::warn!("weights.json not written: {e}"),
        Err(e) => return Err(e.into()),
    }
    write_json(Some(&dir.join("stats.json")), &label_stats(&docs)?.to_report())?;

    if let Some(path) = gold {
        let report = compare_with_gold(&docs, &read_bio(path)?)?;
        write_json(Some(&dir.join("gold_report.json")), &report)?;
    }
    Ok(())
}
