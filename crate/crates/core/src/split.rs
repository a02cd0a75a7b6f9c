//! Train/eval partition by document.
//!
//! Documents are ordered by a seeded hash of their id and the first
//! `round(fraction · n)` go to training, so the split size is exact and all
//! chunks of one document land on the same side.

use std::collections::BTreeSet;

use twox_hash::XxHash64;

use crate::encoder::EncodedChunk;
use crate::Error;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

pub fn split_documents(
    doc_ids: &BTreeSet<u64>,
    fraction: f64,
    seed: u64,
) -> Result<(BTreeSet<u64>, BTreeSet<u64>), Error> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!("split fraction {fraction} must lie in (0, 1)")));
    }
    let mut ranked: Vec<(u64, u64)> =
        doc_ids.iter().map(|&id| (XxHash64::oneshot(seed, &id.to_le_bytes()), id)).collect();
    ranked.sort_unstable();
    let n_train = (fraction * ranked.len() as f64).round() as usize;
    let train = ranked[..n_train].iter().map(|&(_, id)| id).collect();
    let eval = ranked[n_train..].iter().map(|&(_, id)| id).collect();
    Ok((train, eval))
}

/// Splits chunks by their document id; chunk order is preserved on each side.
pub fn split_chunks(
    chunks: Vec<EncodedChunk>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<EncodedChunk>, Vec<EncodedChunk>), Error> {
    let ids: BTreeSet<u64> = chunks.iter().map(|c| c.doc_id).collect();
    let (train_ids, _) = split_documents(&ids, fraction, seed)?;
    Ok(chunks.into_iter().partition(|c| train_ids.contains(&c.doc_id)))
}
