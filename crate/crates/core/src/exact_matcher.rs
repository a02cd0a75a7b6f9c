//! Decision-number keys and candidate resolution.
//!
//! A decision number looks like `14270/C` (digits/letters) or `1/2/Apple`
//! (digits/digits/letters). Keys are only unique per issuing office, so a
//! key shared by several candidates is reported instead of guessed.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::lsh::CandidateList;
use crate::record_store::{CorpusStore, DocRecord, Variant};
use crate::Error;

// Alternation is leftmost-first: the three-part form wins where both start.
static KEY_REGEX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[0-9]+/[0-9]+/[a-zA-Z]+|[0-9]+/[a-zA-Z]+").expect("valid key regex"));

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DecisionKey {
    pub raw: String,
    /// Issuing office; not present in the corpora seen so far.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub office_scope: Option<String>,
}

impl DecisionKey {
    pub fn new(raw: impl Into<String>) -> Self {
        Self { raw: raw.into(), office_scope: None }
    }
}

/// All non-overlapping decision numbers in document order.
pub fn extract_keys(text: &str) -> Vec<DecisionKey> {
    KEY_REGEX.find_iter(text).map(|m| DecisionKey::new(m.as_str())).collect()
}

pub fn first_key(text: &str) -> Option<DecisionKey> {
    KEY_REGEX.find(text).map(|m| DecisionKey::new(m.as_str()))
}

/// An accepted clear/redacted pairing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub clear_id: u64,
    pub obf_id: u64,
    #[serde(with = "key_as_string")]
    pub key: DecisionKey,
    pub candidate_rank: usize,
}

mod key_as_string {
    use super::DecisionKey;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(key: &DecisionKey, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&key.raw)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DecisionKey, D::Error> {
        String::deserialize(d).map(DecisionKey::new)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmatchedReason {
    /// The clear document, or every candidate, carries no key.
    NoKey,
    /// No candidate shares the clear document's key (includes empty lists).
    NoMatch,
    /// Several candidates share the key.
    Ambiguous,
    /// The chosen redacted document was also claimed by another clear document.
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unmatched {
    pub clear_id: u64,
    pub reason: UnmatchedReason,
}

/// Accepts the unique candidate whose first key equals the clear document's
/// first key. `candidate_rank` is that candidate's position in `candidates`.
pub fn resolve(clear: &DocRecord, candidates: &[&DocRecord]) -> Result<MatchPair, UnmatchedReason> {
    if candidates.is_empty() {
        return Err(UnmatchedReason::NoMatch);
    }
    let key = first_key(&clear.text).ok_or(UnmatchedReason::NoKey)?;

    let mut any_keyed = false;
    let mut hits = candidates.iter().enumerate().filter(|(_, c)| match first_key(&c.text) {
        Some(k) => {
            any_keyed = true;
            k == key
        }
        None => false,
    });
    let hit = hits.next();
    let second = hits.next();
    drop(hits);

    match (hit, second) {
        (Some((rank, obf)), None) => {
            if obf.id == clear.id {
                return Err(UnmatchedReason::NoMatch);
            }
            Ok(MatchPair { clear_id: clear.id, obf_id: obf.id, key, candidate_rank: rank })
        }
        (Some(_), Some(_)) => Err(UnmatchedReason::Ambiguous),
        (None, _) if !any_keyed => Err(UnmatchedReason::NoKey),
        (None, _) => Err(UnmatchedReason::NoMatch),
    }
}

/// Resolves a batch and enforces that no redacted document is paired twice;
/// every clear document claiming a contested redacted id is reported as
/// [`UnmatchedReason::Conflict`].
pub fn resolve_all(outcomes: Vec<(u64, Result<MatchPair, UnmatchedReason>)>) -> (Vec<MatchPair>, Vec<Unmatched>) {
    let mut claims: BTreeMap<u64, usize> = BTreeMap::new();
    for (_, outcome) in &outcomes {
        if let Ok(pair) = outcome {
            *claims.entry(pair.obf_id).or_default() += 1;
        }
    }
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (clear_id, outcome) in outcomes {
        match outcome {
            Ok(pair) if claims[&pair.obf_id] == 1 => pairs.push(pair),
            Ok(_) => unmatched.push(Unmatched { clear_id, reason: UnmatchedReason::Conflict }),
            Err(reason) => unmatched.push(Unmatched { clear_id, reason }),
        }
    }
    pairs.sort_by_key(|p| p.clear_id);
    unmatched.sort_by_key(|u| u.clear_id);
    (pairs, unmatched)
}

/// Resolves every clear document of `store` against its LSH candidates,
/// keeping only candidates that are not themselves clear documents.
pub fn match_store(
    store: &CorpusStore,
    candidates: &[CandidateList],
) -> Result<(Vec<MatchPair>, Vec<Unmatched>), Error> {
    let outcomes = candidates
        .par_iter()
        .filter_map(|list| match store.get(list.doc_id) {
            None => Some(Err(Error::UnknownId(list.doc_id))),
            Some(doc) if doc.variant != Variant::Clear => None,
            Some(doc) => Some(
                list.candidates
                    .iter()
                    .map(|&id| store.get(id).ok_or(Error::UnknownId(id)))
                    .filter(|c| !matches!(c, Ok(c) if c.variant == Variant::Clear))
                    .collect::<Result<Vec<_>, _>>()
                    .map(|others| (doc.id, resolve(doc, &others))),
            ),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(resolve_all(outcomes))
}
