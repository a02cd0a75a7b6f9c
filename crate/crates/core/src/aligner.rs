//! Windowed re-alignment of a clear token stream against its redacted copy.
//!
//! For each clear token the aligner scans the next `window` redacted
//! positions after the latest match. A hit keeps the token and advances the
//! cursor. A miss keeps the token only when its count is identical in both
//! documents (the common-count rescue); otherwise it is labeled `OMISSIS`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::exact_matcher::MatchPair;
use crate::record_store::CorpusStore;
use crate::{Error, OMISSIS};

pub const DEFAULT_WINDOW: usize = 10;

/// Whitespace-free, non-empty word tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    /// Splits whitespace-normalized text on single spaces.
    pub fn tokenize_words(text: &str) -> Self {
        Self { tokens: text.split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect() }
    }

    /// Fails if any token is empty or contains whitespace.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, Error> {
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::InvalidInput(format!("invalid word token {bad:?}")));
        }
        Ok(Self { tokens })
    }

    pub fn as_slice(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn into_inner(self) -> Vec<String> {
        self.tokens
    }
}

pub fn tokenize_words(text: &str) -> TokenSequence {
    TokenSequence::tokenize_words(text)
}

pub fn count_frequencies(tokens: &[String]) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Tokens present in both maps with the same count.
pub fn common_counts<'a>(
    clear: &HashMap<&'a str, usize>,
    obf: &HashMap<&str, usize>,
) -> std::collections::HashSet<&'a str> {
    clear.iter().filter(|(t, c)| obf.get(*t) == Some(c)).map(|(t, _)| *t).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignConfig {
    pub window: usize,
    pub omissis_tag: String,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW, omissis_tag: OMISSIS.to_string() }
    }
}

impl AlignConfig {
    pub fn with_window(window: usize) -> Self {
        Self { window, ..Self::default() }
    }
}

/// Either the token itself or the redaction placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Token,
    Omissis,
}

/// One `(token, label)` item per clear token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledSequence {
    pub items: Vec<(String, Label)>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn omissis_positions(&self) -> Vec<usize> {
        self.items.iter().enumerate().filter(|(_, (_, l))| *l == Label::Omissis).map(|(i, _)| i).collect()
    }

    /// Label text as written out: the token itself, or `OMISSIS`.
    pub fn label_text(&self, i: usize) -> &str {
        match &self.items[i] {
            (t, Label::Token) => t,
            (_, Label::Omissis) => OMISSIS,
        }
    }
}

// On disk a sequence is `[[token, label], ...]`, label being the token or "OMISSIS".
impl Serialize for LabeledSequence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        struct Pair<'a>(&'a str, &'a str);
        impl Serialize for Pair<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut t = s.serialize_tuple(2)?;
                t.serialize_element(self.0)?;
                t.serialize_element(self.1)?;
                t.end()
            }
        }
        s.collect_seq((0..self.items.len()).map(|i| Pair(&self.items[i].0, self.label_text(i))))
    }
}

impl<'de> Deserialize<'de> for LabeledSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw: Vec<(String, String)> = Vec::deserialize(d)?;
        let items = raw
            .into_iter()
            .map(|(token, label)| {
                if label == token {
                    Ok((token, Label::Token))
                } else if label == OMISSIS {
                    Ok((token, Label::Omissis))
                } else {
                    Err(serde::de::Error::custom(format!("label {label:?} is neither {token:?} nor {OMISSIS}")))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { items })
    }
}

/// Aligns `clear` against `obf`, producing one label per clear token.
pub fn align(clear: &TokenSequence, obf: &TokenSequence, cfg: &AlignConfig) -> Result<LabeledSequence, Error> {
    align_traced(clear, obf, cfg).map(|(seq, _)| seq)
}

/// Like [`align`], also returning the latest-match cursor after each clear
/// token (`-1` before the first hit).
pub fn align_traced(
    clear: &TokenSequence,
    obf: &TokenSequence,
    cfg: &AlignConfig,
) -> Result<(LabeledSequence, Vec<isize>), Error> {
    if clear.is_empty() || obf.is_empty() {
        return Err(Error::EmptySequence);
    }
    if cfg.window == 0 {
        return Err(Error::InvalidInput("alignment window must be at least 1".into()));
    }
    let c_clear = count_frequencies(clear.as_slice());
    let c_obf = count_frequencies(obf.as_slice());
    let common = common_counts(&c_clear, &c_obf);

    let obf = obf.as_slice();
    let mut latest: isize = -1;
    let mut items = Vec::with_capacity(clear.len());
    let mut trace = Vec::with_capacity(clear.len());
    for token in clear.as_slice() {
        let start = (latest + 1) as usize;
        let end = (start + cfg.window).min(obf.len());
        let hit = (start..end).find(|&j| obf[j] == *token && obf[j] != cfg.omissis_tag);
        let label = match hit {
            Some(j) => {
                latest = j as isize;
                Label::Token
            }
            None if common.contains(token.as_str()) => Label::Token,
            None => Label::Omissis,
        };
        items.push((token.clone(), label));
        trace.push(latest);
    }
    Ok((LabeledSequence { items }, trace))
}

/// Alignment output for one matched pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub clear_id: u64,
    pub obf_id: u64,
    pub pairs: LabeledSequence,
}

/// Aligns every matched pair, in the order given.
pub fn align_matches(store: &CorpusStore, matches: &[MatchPair], cfg: &AlignConfig) -> Result<Vec<AlignedPair>, Error> {
    matches
        .par_iter()
        .map(|m| {
            let clear = store.get(m.clear_id).ok_or(Error::UnknownId(m.clear_id))?;
            let obf = store.get(m.obf_id).ok_or(Error::UnknownId(m.obf_id))?;
            let pairs = align(&tokenize_words(&clear.text), &tokenize_words(&obf.text), cfg)?;
            Ok(AlignedPair { clear_id: m.clear_id, obf_id: m.obf_id, pairs })
        })
        .collect()
}
