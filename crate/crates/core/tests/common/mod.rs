//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use std::collections::HashSet;

/// Clear-token positions left unmatched by a global longest-common-subsequence
/// alignment (unit-cost edit distance without substitutions). Redaction
/// placeholders in `obf` never match.
pub fn global_alignment_omissis(clear: &[String], obf: &[String], placeholder: &str) -> HashSet<usize> {
    let n = clear.len();
    let m = obf.len();
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if clear[i] == obf[j] && obf[j] != placeholder {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let mut matched = HashSet::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if clear[i] == obf[j] && obf[j] != placeholder && dp[i][j] == dp[i + 1][j + 1] + 1 {
            matched.insert(i);
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    (0..n).filter(|k| !matched.contains(k)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteMetrics {
    pub counts: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class_f1: Vec<f64>,
}

/// Confusion counts by scanning once per (gold, pred) cell, then the
/// headline scores micro-averaged over classes 1 and 2.
pub fn brute_force_metrics(pred: &[i64], gold: &[i64], classes: i64) -> BruteMetrics {
    let kept: Vec<(i64, i64)> = pred.iter().zip(gold).filter(|(_, g)| **g != -100).map(|(p, g)| (*p, *g)).collect();
    let mut counts = Vec::new();
    for g in 0..classes {
        let mut row = Vec::new();
        for p in 0..classes {
            row.push(kept.iter().filter(|&&(pp, gg)| pp == p && gg == g).count() as u64);
        }
        counts.push(row);
    }
    let total = kept.len() as f64;
    let correct = kept.iter().filter(|(p, g)| p == g).count() as f64;

    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let harmonic = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };

    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fneg = 0.0;
    for c in [1, 2] {
        tp += kept.iter().filter(|&&(p, g)| p == c && g == c).count() as f64;
        fp += kept.iter().filter(|&&(p, g)| p == c && g != c).count() as f64;
        fneg += kept.iter().filter(|&&(p, g)| p != c && g == c).count() as f64;
    }
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + fneg);

    let per_class_f1 = (0..classes)
        .map(|c| {
            let t = kept.iter().filter(|&&(p, g)| p == c && g == c).count() as f64;
            let pp = kept.iter().filter(|&&(p, _)| p == c).count() as f64;
            let gg = kept.iter().filter(|&&(_, g)| g == c).count() as f64;
            harmonic(div(t, pp), div(t, gg))
        })
        .collect();

    BruteMetrics { counts, accuracy: correct / total, precision, recall, f1: harmonic(precision, recall), per_class_f1 }
}
