//! Model-ready encoding of BIO documents.
//!
//! Words are split into subwords by greedy longest match against a vocabulary,
//! every subword inherits its word's label, and the resulting sequence is cut
//! into fixed-length chunks padded with id 0 (label -100). The attention mask
//! is 1 exactly where the id is not the pad id.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::bio::BioDoc;
use crate::{Error, IGNORE_INDEX};

pub const DEFAULT_L_MAX: usize = 512;
pub const PAD_ID: u32 = 0;

/// Words longer than this (in chars) are mapped straight to the unknown id.
const MAX_CHARS_PER_WORD: usize = 100;

/// Token vocabulary loaded from a file with one token per line; a token's id
/// is its 0-based line number. Line 0 is the pad token.
#[derive(Debug, Clone)]
pub struct SubwordVocab {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    continuation: String,
    unk_id: u32,
    lowercase: bool,
}

#[derive(Debug, Clone)]
pub struct VocabOptions {
    pub continuation: String,
    pub unk_token: String,
    pub lowercase: bool,
}

impl Default for VocabOptions {
    fn default() -> Self {
        Self { continuation: "##".into(), unk_token: "[UNK]".into(), lowercase: false }
    }
}

impl SubwordVocab {
    pub fn from_tokens<I, S>(tokens: I, opts: &VocabOptions) -> Result<Self, Error>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::EmptyVocab);
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::InvalidInput(format!("vocabulary line {} is empty", i + 1)));
            }
            if ids.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("vocabulary token {tok:?} appears twice")));
            }
        }
        let unk_id = *ids
            .get(&opts.unk_token)
            .ok_or_else(|| Error::InvalidInput(format!("vocabulary has no unknown token {:?}", opts.unk_token)))?;
        if unk_id == PAD_ID {
            return Err(Error::InvalidInput("the unknown token cannot take the pad id 0".into()));
        }
        Ok(Self { ids, tokens, continuation: opts.continuation.clone(), unk_id, lowercase: opts.lowercase })
    }

    pub fn read<R: BufRead>(input: R, opts: &VocabOptions) -> Result<Self, Error> {
        let lines = input.lines().collect::<Result<Vec<_>, _>>()?;
        let lines = lines.into_iter().map(|l| l.trim_end_matches('\r').to_string());
        Self::from_tokens(lines, opts)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Lookup that never yields the pad id.
    fn lookup(&self, piece: &str) -> Option<u32> {
        self.ids.get(piece).copied().filter(|&id| id != PAD_ID)
    }

    /// Greedy longest-match split of one word.
    pub fn tokenize_word(&self, word: &str) -> Vec<u32> {
        let word = if self.lowercase { word.to_lowercase() } else { word.to_string() };
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        if chars.is_empty() || chars.len() > MAX_CHARS_PER_WORD {
            return vec![self.unk_id];
        }
        let byte_at = |i: usize| if i == chars.len() { word.len() } else { chars[i].0 };

        let mut out = Vec::new();
        let mut start = 0;
        let mut piece = String::new();
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while end > start {
                piece.clear();
                if start > 0 {
                    piece.push_str(&self.continuation);
                }
                piece.push_str(&word[byte_at(start)..byte_at(end)]);
                if let Some(id) = self.lookup(&piece) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => out.push(id),
                None => return vec![self.unk_id],
            }
            start = end;
        }
        out
    }
}

/// Subword ids plus, for each subword, the index of the word it came from.
pub fn subword_tokenize<S: AsRef<str>>(
    words: &[S],
    vocab: &SubwordVocab,
) -> Result<(Vec<u32>, Vec<Option<usize>>), Error> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocab);
    }
    let mut ids = Vec::with_capacity(words.len());
    let mut word_ids = Vec::with_capacity(words.len());
    for (w, word) in words.iter().enumerate() {
        for id in vocab.tokenize_word(word.as_ref()) {
            ids.push(id);
            word_ids.push(Some(w));
        }
    }
    Ok((ids, word_ids))
}

/// `labels[i] = word_labels[word_ids[i]]`, or -100 where the word id is absent.
pub fn align_labels(word_ids: &[Option<usize>], word_labels: &[i64]) -> Result<Vec<i64>, Error> {
    word_ids
        .iter()
        .map(|w| match *w {
            None => Ok(IGNORE_INDEX),
            Some(i) => word_labels.get(i).copied().ok_or(Error::IndexOutOfRange { index: i, len: word_labels.len() }),
        })
        .collect()
}

/// An unpadded slice of a document's subword sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawChunk {
    pub ids: Vec<u32>,
    pub labels: Vec<i64>,
}

/// Splits into `ceil(len / l_max)` contiguous chunks; the last may be short.
pub fn chunk(ids: &[u32], labels: &[i64], l_max: usize) -> Result<Vec<RawChunk>, Error> {
    if ids.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} ids vs {} labels", ids.len(), labels.len())));
    }
    if l_max == 0 {
        return Err(Error::InvalidInput("chunk length must be positive".into()));
    }
    Ok(ids
        .chunks(l_max)
        .zip(labels.chunks(l_max))
        .map(|(i, l)| RawChunk { ids: i.to_vec(), labels: l.to_vec() })
        .collect())
}

/// One fixed-length training record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedChunk {
    pub doc_id: u64,
    pub chunk_index: usize,
    pub input_ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub token_type_ids: Vec<u8>,
    pub labels: Vec<i64>,
}

impl EncodedChunk {
    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }

    /// Number of non-pad positions.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().map(|&m| m as usize).sum()
    }

    /// The chunk content with padding stripped.
    pub fn unpadded(&self) -> (&[u32], &[i64]) {
        let n = self.real_len();
        (&self.input_ids[..n], &self.labels[..n])
    }

    /// Checks the mask, padding and token-type invariants for length `l_max`.
    pub fn validate(&self, l_max: usize) -> Result<(), Error> {
        let bad = |what: &str| Err(Error::Invariant(format!("doc {} chunk {}: {what}", self.doc_id, self.chunk_index)));
        if self.input_ids.len() != l_max
            || self.attention_mask.len() != l_max
            || self.token_type_ids.len() != l_max
            || self.labels.len() != l_max
        {
            return bad("field lengths differ from l_max");
        }
        for i in 0..l_max {
            let real = self.input_ids[i] != PAD_ID;
            if self.attention_mask[i] != real as u8 {
                return bad("attention mask disagrees with pad positions");
            }
            if !real && self.labels[i] != IGNORE_INDEX {
                return bad("padding carries a label");
            }
            if !(self.labels[i] == IGNORE_INDEX || (0..=2).contains(&self.labels[i])) {
                return bad("label outside {-100, 0, 1, 2}");
            }
        }
        if self.token_type_ids.iter().any(|&t| t != 0) {
            return bad("non-zero token type id");
        }
        Ok(())
    }
}

/// Pads ids with 0 and labels with -100 up to `l_max` and builds the mask.
pub fn finalize_chunk(raw: RawChunk, l_max: usize, doc_id: u64, chunk_index: usize) -> Result<EncodedChunk, Error> {
    let len = raw.ids.len();
    if len > l_max {
        return Err(Error::OverlongChunk { len, max: l_max });
    }
    if raw.labels.len() != len {
        return Err(Error::ShapeMismatch(format!("{len} ids vs {} labels", raw.labels.len())));
    }
    let mut input_ids = raw.ids;
    let mut labels = raw.labels;
    input_ids.resize(l_max, PAD_ID);
    labels.resize(l_max, IGNORE_INDEX);
    let attention_mask = input_ids.iter().map(|&id| (id != PAD_ID) as u8).collect();
    Ok(EncodedChunk { doc_id, chunk_index, input_ids, attention_mask, token_type_ids: vec![0; l_max], labels })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderConfig {
    pub l_max: usize,
    /// Reserve two positions per chunk for classifier/separator tokens.
    pub special_tokens: Option<SpecialTokens>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialTokens {
    pub cls_id: u32,
    pub sep_id: u32,
}

impl SpecialTokens {
    pub fn from_vocab(vocab: &SubwordVocab, cls: &str, sep: &str) -> Result<Self, Error> {
        let get = |t: &str| {
            vocab
                .id(t)
                .filter(|&id| id != PAD_ID)
                .ok_or_else(|| Error::InvalidInput(format!("vocabulary has no special token {t:?}")))
        };
        Ok(Self { cls_id: get(cls)?, sep_id: get(sep)? })
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { l_max: DEFAULT_L_MAX, special_tokens: None }
    }
}

/// Encodes one document into `K` padded chunks.
pub fn encode_doc(doc: &BioDoc, vocab: &SubwordVocab, cfg: &EncoderConfig) -> Result<Vec<EncodedChunk>, Error> {
    let (ids, word_ids) = subword_tokenize(&doc.tokens, vocab)?;
    let labels = align_labels(&word_ids, &doc.codes())?;
    let body = match cfg.special_tokens {
        Some(_) if cfg.l_max < 3 => return Err(Error::InvalidInput("l_max must leave room for special tokens".into())),
        Some(_) => cfg.l_max - 2,
        None => cfg.l_max,
    };
    chunk(&ids, &labels, body)?
        .into_iter()
        .enumerate()
        .map(|(k, mut raw)| {
            if let Some(sp) = cfg.special_tokens {
                raw.ids.insert(0, sp.cls_id);
                raw.ids.push(sp.sep_id);
                raw.labels.insert(0, IGNORE_INDEX);
                raw.labels.push(IGNORE_INDEX);
            }
            finalize_chunk(raw, cfg.l_max, doc.id, k)
        })
        .collect()
}
