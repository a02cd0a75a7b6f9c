//! MinHash signatures and banded LSH candidate generation.
//!
//! Documents are reduced to sets of hashed word shingles, sketched with
//! `num_perms` seeded universal hashes over the Mersenne prime 2^61 - 1, and
//! bucketed by bands of `r` consecutive signature rows. Two documents become
//! candidates when any band collides, which happens with probability
//! `1 - (1 - J^r)^b` for Jaccard similarity `J`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::Hasher;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::record_store::DocRecord;
use crate::Error;

pub const DEFAULT_NUM_PERMS: usize = 128;
pub const DEFAULT_SHINGLE_K: usize = 3;
pub const DEFAULT_THRESHOLD: f64 = 0.95;

const MERSENNE_61: u64 = (1 << 61) - 1;

/// Marks "no shingle seen" in a signature slot. Never produced for a
/// non-empty set since every real value is below 2^61 - 1.
const EMPTY_SLOT: u64 = u64::MAX;

/// Hashes every contiguous `k`-token window (joined by single spaces).
///
/// Sequences shorter than `k` hash as one window covering the whole sequence.
pub fn shingle<S: AsRef<str>>(tokens: &[S], k: usize) -> Result<HashSet<u64>, Error> {
    if k == 0 {
        return Err(Error::InvalidInput("shingle size must be at least 1".into()));
    }
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    if tokens.len() < k {
        return Ok(HashSet::from([hash_window(tokens)]));
    }
    Ok(tokens.windows(k).map(hash_window).collect())
}

fn hash_window<S: AsRef<str>>(window: &[S]) -> u64 {
    let mut hasher = XxHash64::with_seed(0);
    for (i, tok) in window.iter().enumerate() {
        if i > 0 {
            hasher.write(b" ");
        }
        hasher.write(tok.as_ref().as_bytes());
    }
    hasher.finish()
}

/// `|a ∩ b| / |a ∪ b|` computed exactly.
pub fn exact_jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> Result<f64, Error> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::InvalidInput("both sets are empty".into()));
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|x| large.contains(x)).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub num_perms: usize,
    pub seed: u64,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    fn check_compatible(&self, other: &Self) -> Result<(), Error> {
        if self.num_perms != other.num_perms || self.seed != other.seed {
            return Err(Error::IncompatibleSignatures(format!(
                "({} perms, seed {}) vs ({} perms, seed {})",
                self.num_perms, self.seed, other.num_perms, other.seed
            )));
        }
        Ok(())
    }

    /// Fraction of slots on which the two signatures agree.
    pub fn jaccard_estimate(&self, other: &Self) -> Result<f64, Error> {
        self.check_compatible(other)?;
        let agree = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        Ok(agree as f64 / self.num_perms as f64)
    }
}

pub fn jaccard_estimate(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64, Error> {
    a.jaccard_estimate(b)
}

/// A fixed family of `num_perms` hashes `h_i(x) = (a_i x + b_i) mod (2^61 - 1)`
/// drawn from a ChaCha stream keyed by `seed`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(num_perms: usize, seed: u64) -> Result<Self, Error> {
        if num_perms == 0 {
            return Err(Error::InvalidInput("num_perms must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs =
            (0..num_perms).map(|_| (rng.random_range(1..MERSENNE_61), rng.random_range(0..MERSENNE_61))).collect();
        Ok(Self { seed, coeffs })
    }

    pub fn num_perms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn sign(&self, shingles: &HashSet<u64>) -> Result<MinHashSignature, Error> {
        if shingles.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut values = vec![EMPTY_SLOT; self.coeffs.len()];
        for &s in shingles {
            let x = reduce_mersenne(s as u128);
            for (slot, &(a, b)) in values.iter_mut().zip(&self.coeffs) {
                let h = reduce_mersenne(a as u128 * x as u128 + b as u128);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        Ok(MinHashSignature { num_perms: self.coeffs.len(), seed: self.seed, values })
    }
}

/// `v mod (2^61 - 1)` for any `v < 2^122 + 2^64`.
fn reduce_mersenne(v: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let mut r = (v & p) + (v >> 61);
    r = (r & p) + (r >> 61);
    if r >= p {
        r -= p;
    }
    r as u64
}

pub fn minhash(shingles: &HashSet<u64>, num_perms: usize, seed: u64) -> Result<MinHashSignature, Error> {
    MinHasher::new(num_perms, seed)?.sign(shingles)
}

/// Signs each record's whitespace tokens in parallel.
pub fn sign_records<'a, I>(records: I, k: usize, hasher: &MinHasher) -> Result<BTreeMap<u64, MinHashSignature>, Error>
where
    I: IntoIterator<Item = &'a DocRecord>,
{
    let records: Vec<&DocRecord> = records.into_iter().collect();
    records
        .par_iter()
        .map(|r| {
            let tokens: Vec<&str> = r.tokens().collect();
            let sig = hasher.sign(&shingle(&tokens, k)?)?;
            Ok((r.id, sig))
        })
        .collect()
}

/// Picks `(bands, rows)` with `bands * rows = num_perms` whose S-curve
/// midpoint `(1/b)^(1/r)` is closest to `threshold`. Ties go to larger `r`.
pub fn tune_bands(num_perms: usize, threshold: f64) -> (usize, usize) {
    let mut best = (1, num_perms);
    let mut best_err = f64::INFINITY;
    // Ascending b means descending r, so a strict `<` keeps the larger r on ties.
    for b in (1..=num_perms).filter(|b| num_perms.is_multiple_of(*b)) {
        let r = num_perms / b;
        let err = (threshold - (1.0 / b as f64).powf(1.0 / r as f64)).abs();
        if err < best_err {
            best_err = err;
            best = (b, r);
        }
    }
    best
}

/// Probability that a pair with Jaccard `j` shares at least one band.
pub fn collision_probability(j: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - j.powi(rows as i32)).powi(bands as i32)
}

/// Candidates for one document, ascending and never containing the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateList {
    pub doc_id: u64,
    pub candidates: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct LshIndex {
    bands: usize,
    rows: usize,
    threshold: f64,
    num_perms: usize,
    seed: u64,
    buckets: Vec<HashMap<u64, Vec<u64>>>,
    doc_keys: BTreeMap<u64, Vec<u64>>,
}

impl LshIndex {
    /// Indexes the signatures with bands tuned for `threshold`.
    pub fn build(signatures: &BTreeMap<u64, MinHashSignature>, threshold: f64) -> Result<Self, Error> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidInput(format!("threshold {threshold} is outside (0, 1)")));
        }
        let first = signatures.values().next().ok_or(Error::EmptyInput)?;
        let (bands, rows) = tune_bands(first.num_perms, threshold);
        Self::with_bands(signatures, bands, rows, threshold)
    }

    pub fn with_bands(
        signatures: &BTreeMap<u64, MinHashSignature>,
        bands: usize,
        rows: usize,
        threshold: f64,
    ) -> Result<Self, Error> {
        let first = signatures.values().next().ok_or(Error::EmptyInput)?;
        if bands == 0 || rows == 0 || bands * rows != first.num_perms {
            return Err(Error::InvalidInput(format!(
                "{bands} bands x {rows} rows does not cover {} permutations",
                first.num_perms
            )));
        }
        for sig in signatures.values() {
            first.check_compatible(sig)?;
        }

        let doc_keys: BTreeMap<u64, Vec<u64>> =
            signatures.par_iter().map(|(&id, sig)| (id, band_keys(sig, bands, rows))).collect();
        let buckets = (0..bands)
            .into_par_iter()
            .map(|band| {
                let mut table: HashMap<u64, Vec<u64>> = HashMap::new();
                for (&id, keys) in &doc_keys {
                    table.entry(keys[band]).or_default().push(id);
                }
                table
            })
            .collect();

        Ok(Self { bands, rows, threshold, num_perms: first.num_perms, seed: first.seed, buckets, doc_keys })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn num_perms(&self) -> usize {
        self.num_perms
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.doc_keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_keys.is_empty()
    }

    /// Number of buckets holding `id` (equals `bands` for indexed docs).
    pub fn bucket_memberships(&self, id: u64) -> usize {
        self.buckets.iter().filter(|t| t.values().any(|members| members.contains(&id))).count()
    }

    pub fn query(&self, id: u64) -> Result<CandidateList, Error> {
        let keys = self.doc_keys.get(&id).ok_or(Error::UnknownId(id))?;
        let mut candidates: Vec<u64> = keys
            .iter()
            .zip(&self.buckets)
            .flat_map(|(key, table)| table[key].iter().copied())
            .filter(|&other| other != id)
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        Ok(CandidateList { doc_id: id, candidates })
    }
}

fn band_keys(sig: &MinHashSignature, bands: usize, rows: usize) -> Vec<u64> {
    (0..bands)
        .map(|band| {
            let mut hasher = XxHash64::with_seed(band as u64);
            for v in &sig.values[band * rows..(band + 1) * rows] {
                hasher.write(&v.to_le_bytes());
            }
            hasher.finish()
        })
        .collect()
}
