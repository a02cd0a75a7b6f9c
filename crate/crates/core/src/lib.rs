//! Data machinery for building de-identification training sets from pairs of
//! clear and redacted documents.
//!
//! The stages, in pipeline order:
//!
//! - [`record_store`]: ingest and normalize plain-text documents.
//! - [`lsh`]: MinHash LSH candidate generation between documents.
//! - [`exact_matcher`]: resolve candidates to a unique redacted twin by decision number.
//! - [`aligner`]: windowed re-alignment of clear and redacted token streams.
//! - [`bio`]: BIO tagging and label statistics.
//! - [`encoder`]: subword tokenization, label alignment, chunking and padding.
//! - [`evalkit`]: balanced class weights, weighted loss and token metrics.
//! - [`synth`]: synthetic clear/redacted pairs with known gold labels.

pub mod aligner;
pub mod bio;
pub mod config;
pub mod encoder;
pub mod evalkit;
pub mod exact_matcher;
pub mod jsonl;
pub mod lsh;
pub mod record_store;
pub mod split;
pub mod synth;

pub use aligner::{align, AlignConfig, AlignedPair, Label, LabeledSequence, TokenSequence};
pub use bio::{to_bio, BioDoc, BioTag, LabelStats};
pub use config::PipelineConfig;
pub use encoder::{EncodedChunk, EncoderConfig, SubwordVocab};
pub use evalkit::{balanced_weights, token_metrics, weighted_ce_loss, ClassWeights, TokenMetrics};
pub use exact_matcher::{extract_keys, resolve, DecisionKey, MatchPair};
pub use lsh::{LshIndex, MinHashSignature};
pub use record_store::{CorpusStore, DocRecord, Variant};

/// The placeholder published in place of redacted content.
pub const OMISSIS: &str = "OMISSIS";

/// Label value excluded from loss and metrics.
pub const IGNORE_INDEX: i64 = -100;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty input")]
    EmptyInput,
    #[error("signatures are incompatible: {0}")]
    IncompatibleSignatures(String),
    #[error("document id {0} is not indexed")]
    UnknownId(u64),
    #[error("token sequence is empty")]
    EmptySequence,
    #[error("vocabulary is empty")]
    EmptyVocab,
    #[error("word id {index} out of range for {len} word labels")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("chunk of length {len} exceeds maximum {max}")]
    OverlongChunk { len: usize, max: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("class {0} has zero frequency; smooth the counts or drop the class")]
    ZeroFrequency(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("distribution at position {0} does not sum to 1")]
    UnnormalizedDistribution(usize),
    #[error("length mismatch: {0} predictions vs {1} gold labels")]
    LengthMismatch(usize, usize),
    #[error("no positions left to evaluate after excluding ignored labels")]
    EmptyEvaluation,
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
