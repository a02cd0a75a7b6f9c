//! BIO tagging of aligned sequences and corpus label statistics.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::aligner::{Label, LabeledSequence};
use crate::Error;

/// Single-class BIO tag. Integer codes are `O=0`, `B-OMISSIS=1`, `I-OMISSIS=2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioTag {
    O,
    B,
    I,
}

impl BioTag {
    pub const ALL: [BioTag; 3] = [BioTag::O, BioTag::B, BioTag::I];

    pub fn code(self) -> u8 {
        match self {
            BioTag::O => 0,
            BioTag::B => 1,
            BioTag::I => 2,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(BioTag::O),
            1 => Some(BioTag::B),
            2 => Some(BioTag::I),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BioTag::O => "O",
            BioTag::B => "B-OMISSIS",
            BioTag::I => "I-OMISSIS",
        }
    }
}

impl Serialize for BioTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for BioTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = i64::deserialize(d)?;
        BioTag::from_code(code).ok_or_else(|| serde::de::Error::custom(format!("invalid BIO code {code}")))
    }
}

/// Tag totals indexed by code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCounts(pub [u64; 3]);

impl TagCounts {
    pub fn from_tags(tags: &[BioTag]) -> Self {
        let mut c = [0u64; 3];
        for t in tags {
            c[t.code() as usize] += 1;
        }
        Self(c)
    }

    pub fn get(&self, tag: BioTag) -> u64 {
        self.0[tag.code() as usize]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl AddAssign for TagCounts {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

/// A tagged document. On disk: `{"id", "tokens", "tags"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BioDoc {
    pub id: u64,
    pub tokens: Vec<String>,
    pub tags: Vec<BioTag>,
}

impl BioDoc {
    /// Checks lengths and BIO well-formedness.
    pub fn new(id: u64, tokens: Vec<String>, tags: Vec<BioTag>) -> Result<Self, Error> {
        let doc = Self { id, tokens, tags };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.tokens.len() != self.tags.len() {
            return Err(Error::InvalidInput(format!(
                "document {}: {} tokens but {} tags",
                self.id,
                self.tokens.len(),
                self.tags.len()
            )));
        }
        if !is_well_formed(&self.tags) {
            return Err(Error::InvalidInput(format!("document {}: I-OMISSIS opens a run", self.id)));
        }
        Ok(())
    }

    pub fn counts(&self) -> TagCounts {
        TagCounts::from_tags(&self.tags)
    }

    pub fn codes(&self) -> Vec<i64> {
        self.tags.iter().map(|t| t.code() as i64).collect()
    }
}

/// No I-OMISSIS at the start or directly after an O.
pub fn is_well_formed(tags: &[BioTag]) -> bool {
    let mut prev = BioTag::O;
    for &t in tags {
        if t == BioTag::I && prev == BioTag::O {
            return false;
        }
        prev = t;
    }
    true
}

/// Each maximal run of `OMISSIS` labels becomes `B, I, I, ...`; everything else is `O`.
pub fn to_bio(id: u64, seq: &LabeledSequence) -> BioDoc {
    let mut tags = Vec::with_capacity(seq.len());
    let mut in_run = false;
    for (_, label) in &seq.items {
        let tag = match (label, in_run) {
            (Label::Omissis, false) => BioTag::B,
            (Label::Omissis, true) => BioTag::I,
            (Label::Token, _) => BioTag::O,
        };
        in_run = *label == Label::Omissis;
        tags.push(tag);
    }
    BioDoc { id, tokens: seq.items.iter().map(|(t, _)| t.clone()).collect(), tags }
}

/// Positions covered by any B- or I- tag.
pub fn decode_positions(tags: &[BioTag]) -> Vec<usize> {
    tags.iter().enumerate().filter(|(_, t)| **t != BioTag::O).map(|(i, _)| i).collect()
}

/// Half-open `[start, end)` spans of each B-headed run.
pub fn decode_runs(tags: &[BioTag]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for (i, t) in tags.iter().enumerate() {
        match t {
            BioTag::B => {
                if let Some(s) = open.take() {
                    runs.push((s, i));
                }
                open = Some(i);
            }
            BioTag::I => {}
            BioTag::O => {
                if let Some(s) = open.take() {
                    runs.push((s, i));
                }
            }
        }
    }
    if let Some(s) = open {
        runs.push((s, tags.len()));
    }
    runs
}

/// Corpus totals and per-document averages of each tag.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStats {
    pub doc_count: u64,
    pub totals: TagCounts,
}

impl LabelStats {
    pub fn from_totals(doc_count: u64, totals: TagCounts) -> Result<Self, Error> {
        if doc_count == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self { doc_count, totals })
    }

    pub fn averages(&self) -> [f64; 3] {
        self.totals.0.map(|t| t as f64 / self.doc_count as f64)
    }

    /// Associative merge of two corpora.
    pub fn merge(&self, other: &Self) -> Self {
        let mut totals = self.totals;
        totals += other.totals;
        Self { doc_count: self.doc_count + other.doc_count, totals }
    }

    pub fn to_report(&self) -> StatsReport {
        let averages = self.averages();
        StatsReport {
            doc_count: self.doc_count,
            labels: BioTag::ALL
                .iter()
                .map(|&t| LabelRow {
                    label: t.name().to_string(),
                    total_count: self.totals.get(t),
                    average_count_per_document: averages[t.code() as usize],
                })
                .collect(),
        }
    }
}

pub fn label_stats<'a, I>(docs: I) -> Result<LabelStats, Error>
where
    I: IntoIterator<Item = &'a BioDoc>,
{
    let mut totals = TagCounts::default();
    let mut n = 0;
    for d in docs {
        totals += d.counts();
        n += 1;
    }
    LabelStats::from_totals(n, totals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub label: String,
    pub total_count: u64,
    pub average_count_per_document: f64,
}

/// JSON form of [`LabelStats`]: one row per label with total and average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub doc_count: u64,
    pub labels: Vec<LabelRow>,
}
