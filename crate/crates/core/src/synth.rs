//! Synthetic clear/redacted document pairs with known gold labels.
//!
//! Each clear document opens with a decision-number header and continues with
//! filler words. Redacted spans consist of sentinel tokens (uppercase name plus
//! a per-document counter) that occur nowhere else in the document, and each
//! span is replaced by a single `OMISSIS` token in the redacted copy. Optional
//! insert/delete noise is applied to the redacted copy away from redactions.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bio::{BioDoc, BioTag};
use crate::record_store::{CorpusStore, DocRecord, Variant};
use crate::{Error, OMISSIS};

const SYLLABLES: [&str; 20] = [
    "ca", "de", "la", "mi", "no", "pe", "ri", "so", "tu", "va", "ge", "bo", "fa", "lu", "ze", "ti", "ra", "co", "ne",
    "sa",
];

const FUNCTION_WORDS: [&str; 24] = [
    "il",
    "la",
    "di",
    "del",
    "della",
    "che",
    "e",
    "in",
    "per",
    "con",
    "al",
    "nel",
    "ricorso",
    "sentenza",
    "tribunale",
    "giudice",
    "parte",
    "atto",
    "ai",
    "sensi",
    "art.",
    "comma",
    "cui",
    "non",
];

const SURNAMES: [&str; 12] = [
    "ROSSI", "BIANCHI", "ROMA", "FERRARI", "ESPOSITO", "RUSSO", "COLOMBO", "RICCI", "MARINO", "GRECO", "BRUNO", "GALLO",
];

const HEADER_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    None,
    Insert,
    Delete,
    /// Each event is an insertion or a deletion with equal probability.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub doc_count: usize,
    /// Clear-document length including the four-token header.
    pub tokens_per_doc: RangeInclusive<usize>,
    pub spans_per_doc: RangeInclusive<usize>,
    pub span_length: RangeInclusive<usize>,
    /// Cap on redacted tokens as a fraction of the document; spans are
    /// dropped until the cap holds.
    pub max_density: Option<f64>,
    pub noise: Noise,
    /// Per-token probability of a noise event.
    pub noise_rate: f64,
    /// Noise stays more than this many tokens away from any redacted token.
    pub noise_radius: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            doc_count: 50,
            tokens_per_doc: 300..=600,
            spans_per_doc: 0..=20,
            span_length: 1..=5,
            max_density: None,
            noise: Noise::None,
            noise_rate: 0.0,
            noise_radius: crate::aligner::DEFAULT_WINDOW,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Documents of 1,200-1,600 tokens with 0-15 spans of 1-2 tokens, close
    /// to the per-document label averages of a real de-identified corpus
    /// (about 1,384 O, 7.6 B and 4.1 I tags per document).
    pub fn realistic(doc_count: usize, seed: u64) -> Self {
        Self {
            doc_count,
            tokens_per_doc: 1200..=1600,
            spans_per_doc: 0..=15,
            span_length: 1..=2,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), Error> {
        let fail = |m: &str| Err(Error::InfeasibleSpec(m.to_string()));
        if self.tokens_per_doc.is_empty() || self.spans_per_doc.is_empty() || self.span_length.is_empty() {
            return fail("empty range");
        }
        if *self.tokens_per_doc.start() <= HEADER_LEN {
            return fail("documents must be longer than the header");
        }
        if *self.span_length.start() == 0 {
            return fail("span length must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return fail("noise rate must lie in [0, 1]");
        }
        if let Some(d) = self.max_density {
            if !(0.0..=1.0).contains(&d) {
                return fail("max density must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPair {
    pub clear: DocRecord,
    pub obf: DocRecord,
    pub gold: BioDoc,
    /// Redacted spans as half-open clear-token ranges.
    pub spans: Vec<(usize, usize)>,
}

/// Generated pairs. Clear ids are `0..n`; redacted ids are `n..2n` in a
/// seeded shuffled order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCorpus {
    pub pairs: Vec<SynthPair>,
}

impl SynthCorpus {
    pub fn store(&self) -> CorpusStore {
        let records = self.pairs.iter().flat_map(|p| [p.clear.clone(), p.obf.clone()]).collect();
        CorpusStore::from_records(records).expect("generated ids are unique")
    }

    pub fn gold(&self) -> impl Iterator<Item = &BioDoc> {
        self.pairs.iter().map(|p| &p.gold)
    }

    /// A vocabulary that covers every generated word: special tokens, the
    /// filler words and header words, and single characters with and without
    /// the continuation marker.
    pub fn vocab_tokens(&self) -> Vec<String> {
        let mut words: BTreeSet<String> = filler_words().into_iter().collect();
        words.extend(["nr.", "R.G."].map(String::from));
        let mut chars: BTreeSet<char> = ('a'..='z').chain('A'..='Z').chain('0'..='9').collect();
        chars.extend(['.', '/', ',']);
        for p in &self.pairs {
            for t in &p.clear.text.split(' ').collect::<Vec<_>>() {
                chars.extend(t.chars());
            }
        }
        let mut out: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"].map(String::from).to_vec();
        out.extend(chars.iter().map(|c| c.to_string()).filter(|c| !words.contains(c)));
        out.extend(chars.iter().map(|c| format!("##{c}")));
        out.extend(words);
        out
    }
}

/// Lowercase two- and three-syllable words plus common function words.
pub fn filler_words() -> Vec<String> {
    let mut words: Vec<String> = FUNCTION_WORDS.iter().map(|s| s.to_string()).collect();
    for a in SYLLABLES {
        for b in SYLLABLES {
            words.push(format!("{a}{b}"));
            for c in SYLLABLES {
                words.push(format!("{a}{b}{c}"));
            }
        }
    }
    let mut seen = BTreeSet::new();
    words.retain(|w| seen.insert(w.clone()));
    words
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, Error> {
    spec.validate()?;
    let n = spec.doc_count;
    let filler = filler_words();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));

    let pairs = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64 + 1);
            generate_one(spec, i, order[i], n, &filler, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SynthCorpus { pairs })
}

fn decision_key(index: usize, rng: &mut ChaCha8Rng) -> String {
    let letters: String = (0..rng.random_range(1..=3)).map(|_| (b'A' + rng.random_range(0..26u8)) as char).collect();
    if rng.random_bool(0.5) {
        format!("{}/{letters}", 10_000 + index)
    } else {
        format!("{}/{}/{letters}", 10_000 + index, rng.random_range(2000..2024))
    }
}

fn filler_word<'a>(filler: &'a [String], rng: &mut ChaCha8Rng) -> &'a str {
    // Function words take a third of the draws.
    if rng.random_bool(1.0 / 3.0) {
        &filler[rng.random_range(0..FUNCTION_WORDS.len())]
    } else {
        &filler[rng.random_range(FUNCTION_WORDS.len()..filler.len())]
    }
}

fn generate_one(
    spec: &SynthSpec,
    index: usize,
    obf_slot: usize,
    n: usize,
    filler: &[String],
    rng: &mut ChaCha8Rng,
) -> Result<SynthPair, Error> {
    let len = rng.random_range(spec.tokens_per_doc.clone());
    let body_len = len - HEADER_LEN;

    let mut span_lens: Vec<usize> =
        (0..rng.random_range(spec.spans_per_doc.clone())).map(|_| rng.random_range(spec.span_length.clone())).collect();
    if let Some(d) = spec.max_density {
        let cap = (d * len as f64).floor() as usize;
        while span_lens.iter().sum::<usize>() > cap {
            span_lens.pop();
        }
    }
    let needed = span_lens.iter().sum::<usize>() + span_lens.len().saturating_sub(1);
    if needed > body_len {
        return Err(Error::InfeasibleSpec(format!(
            "document {index}: {} spans need {needed} tokens but the body has {body_len}",
            span_lens.len()
        )));
    }

    // Spread the slack between spans: sorted offsets in [0, slack].
    let slack = body_len - needed;
    let mut offsets: Vec<usize> = (0..span_lens.len()).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();
    let mut spans = Vec::with_capacity(span_lens.len());
    let mut consumed = 0;
    for (k, (&off, &l)) in offsets.iter().zip(&span_lens).enumerate() {
        let start = HEADER_LEN + off + consumed + k;
        spans.push((start, start + l));
        consumed += l;
    }

    let mut clear: Vec<String> = Vec::with_capacity(len);
    clear.extend(["ricorso".to_string(), "nr.".to_string(), decision_key(index, rng), "R.G.".to_string()]);
    clear.extend((0..body_len).map(|_| filler_word(filler, rng).to_string()));
    let mut tags = vec![BioTag::O; len];
    let mut redacted = vec![false; len];
    let mut sentinel = 0usize;
    for &(s, e) in &spans {
        for (pos, tok) in clear.iter_mut().enumerate().take(e).skip(s) {
            *tok = format!("{}{}", SURNAMES[rng.random_range(0..SURNAMES.len())], sentinel);
            sentinel += 1;
            tags[pos] = if pos == s { BioTag::B } else { BioTag::I };
            redacted[pos] = true;
        }
    }

    // Positions eligible for noise: body, not within the radius of a redaction.
    let mut near = vec![false; len];
    for &(s, e) in &spans {
        let lo = s.saturating_sub(spec.noise_radius);
        let hi = (e + spec.noise_radius).min(len);
        near[lo..hi].iter_mut().for_each(|x| *x = true);
    }

    let mut obf: Vec<String> = Vec::with_capacity(len + 8);
    let mut pos = 0;
    while pos < len {
        if let Some(&(s, e)) = spans.iter().find(|(s, _)| *s == pos) {
            debug_assert!(redacted[s]);
            obf.push(OMISSIS.to_string());
            pos = e;
            continue;
        }
        let eligible = spec.noise != Noise::None && pos >= HEADER_LEN && !near[pos];
        if eligible && rng.random_bool(spec.noise_rate) {
            let insert = match spec.noise {
                Noise::Insert => true,
                Noise::Delete => false,
                _ => rng.random_bool(0.5),
            };
            if insert {
                obf.push(filler_word(filler, rng).to_string());
                obf.push(clear[pos].clone());
            }
        } else {
            obf.push(clear[pos].clone());
        }
        pos += 1;
    }

    let clear_rec = DocRecord {
        id: index as u64,
        filename: format!("doc_{index:05}.txt"),
        text: clear.join(" "),
        variant: Variant::Clear,
    };
    let obf_rec = DocRecord {
        id: (n + obf_slot) as u64,
        filename: format!("obf_{obf_slot:05}.txt"),
        text: obf.join(" "),
        variant: Variant::Obfuscated,
    };
    let gold = BioDoc::new(index as u64, clear, tags)?;
    Ok(SynthPair { clear: clear_rec, obf: obf_rec, gold, spans })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bio::decode_runs;

    #[test]
    fn no_redactions_means_identical_copies() {
        let spec = SynthSpec { doc_count: 5, spans_per_doc: 0..=0, ..Default::default() };
        for p in generate(&spec).unwrap().pairs {
            assert_eq!(p.clear.text, p.obf.text);
            assert!(p.gold.tags.iter().all(|&t| t == BioTag::O));
        }
    }

    #[test]
    fn single_span_of_three() {
        let spec = SynthSpec { doc_count: 3, spans_per_doc: 1..=1, span_length: 3..=3, ..Default::default() };
        for p in generate(&spec).unwrap().pairs {
            let (s, e) = p.spans[0];
            assert_eq!(e - s, 3);
            assert_eq!(p.gold.tags[s..e], [BioTag::B, BioTag::I, BioTag::I]);
            assert_eq!(decode_runs(&p.gold.tags), vec![(s, e)]);
            assert_eq!(p.obf.text.matches(OMISSIS).count(), 1);
            assert_eq!(p.obf.tokens().count(), p.clear.tokens().count() - 2);
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = SynthSpec { doc_count: 20, noise: Noise::Mixed, noise_rate: 0.05, seed: 9, ..Default::default() };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 10, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn sentinels_are_unique_and_absent_from_obf() {
        let corpus = generate(&SynthSpec { doc_count: 30, ..Default::default() }).unwrap();
        for p in &corpus.pairs {
            let clear: Vec<&str> = p.clear.tokens().collect();
            let obf: BTreeSet<&str> = p.obf.tokens().collect();
            for &(s, e) in &p.spans {
                for tok in &clear[s..e] {
                    assert_eq!(clear.iter().filter(|t| *t == tok).count(), 1);
                    assert!(!obf.contains(tok));
                }
            }
        }
    }

    #[test]
    fn keys_are_unique_and_shared_with_twin() {
        let corpus = generate(&SynthSpec { doc_count: 40, ..Default::default() }).unwrap();
        let mut keys = BTreeSet::new();
        for p in &corpus.pairs {
            let k = crate::exact_matcher::first_key(&p.clear.text).unwrap();
            assert_eq!(crate::exact_matcher::first_key(&p.obf.text), Some(k.clone()));
            assert!(keys.insert(k.raw));
        }
    }

    #[test]
    fn density_cap_holds() {
        let spec = SynthSpec { doc_count: 50, max_density: Some(0.05), ..Default::default() };
        for p in generate(&spec).unwrap().pairs {
            let redacted: usize = p.spans.iter().map(|(s, e)| e - s).sum();
            assert!(redacted as f64 <= 0.05 * p.gold.tags.len() as f64);
        }
    }

    #[test]
    fn infeasible_spans_are_rejected() {
        let spec =
            SynthSpec { tokens_per_doc: 10..=10, spans_per_doc: 5..=5, span_length: 3..=3, ..Default::default() };
        assert!(matches!(generate(&spec), Err(Error::InfeasibleSpec(_))));
        let spec = SynthSpec { tokens_per_doc: 3..=3, ..Default::default() };
        assert!(matches!(generate(&spec), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn noise_only_touches_the_redacted_copy() {
        let spec = SynthSpec { doc_count: 20, noise: Noise::Delete, noise_rate: 0.1, ..Default::default() };
        for p in generate(&spec).unwrap().pairs {
            let clear_len = p.clear.tokens().count();
            let redacted: usize = p.spans.iter().map(|(s, e)| e - s).sum();
            assert!(p.obf.tokens().count() <= clear_len - redacted + p.spans.len());
            assert_eq!(p.gold.tags.len(), clear_len);
        }
    }

    #[test]
    fn vocab_covers_the_corpus() {
        let corpus = generate(&SynthSpec { doc_count: 5, ..Default::default() }).unwrap();
        let v = crate::encoder::SubwordVocab::from_tokens(corpus.vocab_tokens(), &Default::default()).unwrap();
        for p in &corpus.pairs {
            for t in p.clear.tokens() {
                assert!(!v.tokenize_word(t).contains(&v.unk_id()), "{t}");
            }
        }
    }
}
