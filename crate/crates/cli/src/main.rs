//! `omissis-forge`: pair clear and redacted decisions, recover the redacted
//! token positions, and build a BIO token-classification dataset.
//!
//! Exit codes: 0 success, 1 usage error, 2 missing or invalid input,
//! 3 internal invariant violation.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use omissis_forge::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "omissis-forge", version, about = "De-identification corpus builder")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Jaccard threshold used to tune the LSH bands.
    #[arg(long, global = true, default_value_t = 0.95)]
    threshold: f64,
    #[arg(long, global = true, default_value_t = 128)]
    num_perms: usize,
    /// Words per shingle.
    #[arg(long, global = true, default_value_t = 3)]
    shingle_k: usize,
    /// Alignment search window, in redacted-document tokens.
    #[arg(long, global = true, default_value_t = 10)]
    window: usize,
    /// Chunk length in subword positions.
    #[arg(long, global = true, default_value_t = 512)]
    l_max: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Fraction of documents assigned to the training split.
    #[arg(long, global = true, default_value_t = 0.8)]
    split: f64,
}

impl ConfigArgs {
    fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            threshold: self.threshold,
            num_perms: self.num_perms,
            shingle_k: self.shingle_k,
            window: self.window,
            l_max: self.l_max,
            seed: self.seed,
            split: self.split,
        }
    }
}

#[derive(Debug, Args)]
struct IngestSources {
    /// Files or directories of clear documents.
    #[arg(long, num_args = 1..)]
    clear: Vec<PathBuf>,
    /// Files or directories of redacted documents.
    #[arg(long, num_args = 1..)]
    obf: Vec<PathBuf>,
    /// External text extractor per extension, e.g. `pdf=pdftotext {path} -`.
    #[arg(long = "extractor", value_name = "EXT=COMMAND")]
    extractors: Vec<String>,
}

#[derive(Debug, Args)]
struct VocabArgs {
    /// Subword vocabulary, one token per line; the line number is the id.
    #[arg(long)]
    vocab: PathBuf,
    /// Wrap each chunk in [CLS] ... [SEP], leaving l_max - 2 content positions.
    #[arg(long)]
    special_tokens: bool,
    /// Lowercase words before subword lookup.
    #[arg(long)]
    lowercase: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseKind {
    None,
    Insert,
    Delete,
    Mixed,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read text files into a corpus store (JSON lines).
    Ingest {
        #[command(flatten)]
        sources: IngestSources,
        /// Files or directories whose variant is not known.
        #[arg(long, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Where to write skipped files as JSON lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Find each clear document's redacted twin by LSH and decision key.
    Match {
        /// Corpus store.
        #[arg(long)]
        input: PathBuf,
        /// Accepted pairs.
        #[arg(long)]
        output: PathBuf,
        /// Candidate lists for every document.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Clear documents left without a partner.
        #[arg(long)]
        unmatched: Option<PathBuf>,
    },
    /// Label each clear token as kept or redacted.
    Align {
        /// Corpus store.
        #[arg(long)]
        input: PathBuf,
        /// Pairs written by `match`.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Convert aligned pairs to BIO-tagged documents.
    Annotate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Per-label totals and per-document averages of a BIO file.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Subword-encode BIO documents into fixed-length chunks.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        vocab: VocabArgs,
    },
    /// Balanced class weights from label frequencies.
    Weights {
        /// Comma-separated class frequencies.
        #[arg(long, value_delimiter = ',', conflicts_with = "input")]
        freq: Vec<u64>,
        /// Encoded chunks to count labels from.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a prediction dump against encoded gold chunks.
    Evaluate {
        /// Predictions as JSON lines {"doc_id", "chunk_index", "pred"}.
        #[arg(long)]
        input: PathBuf,
        /// Encoded gold chunks.
        #[arg(long)]
        gold: PathBuf,
        /// Weights JSON to echo into the report.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic corpus of clear/redacted pairs with gold tags.
    Synth {
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 50)]
        docs: usize,
        #[arg(long, value_enum, default_value_t = NoiseKind::None)]
        noise: NoiseKind,
        #[arg(long, default_value_t = 0.0)]
        noise_rate: f64,
        /// Cap on the redacted fraction of each document.
        #[arg(long)]
        max_density: Option<f64>,
        /// Long documents with few short redactions.
        #[arg(long)]
        realistic: bool,
    },
    /// ingest, match, align, annotate, encode, split, weights and stats in one run.
    Pipeline {
        #[command(flatten)]
        sources: IngestSources,
        #[command(flatten)]
        vocab: VocabArgs,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
        /// Gold BIO file to compare the recovered tags against.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Partition encoded chunks by document into train.jsonl and eval.jsonl.
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("OMISSIS_FORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("OMISSIS_FORGE_THREADS={raw:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn is_invariant_violation(err: &anyhow::Error) -> bool {
    err.chain()
        .any(|cause| matches!(cause.downcast_ref::<omissis_forge::Error>(), Some(omissis_forge::Error::Invariant(_))))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| commands::run(cli.command, &cli.config.pipeline_config()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_invariant_violation(&e) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
