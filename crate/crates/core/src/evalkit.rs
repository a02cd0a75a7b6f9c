//! Class weights, the reference weighted cross-entropy, and token metrics.

use serde::{Deserialize, Serialize};

use crate::{Error, IGNORE_INDEX};

/// Tolerance on `Σ p = 1` for each predicted distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Classes counted as positive (B-OMISSIS, I-OMISSIS) in the headline P/R/F1.
pub const POSITIVE_CLASSES: [usize; 2] = [1, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub frequencies: Vec<u64>,
    pub weights: Vec<f64>,
}

impl ClassWeights {
    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    /// Arbitrary non-negative weights, e.g. to switch a class off.
    pub fn custom(weights: Vec<f64>) -> Result<Self, Error> {
        if weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("class weights must be finite and non-negative".into()));
        }
        Ok(Self { frequencies: Vec::new(), weights })
    }
}

/// `w_i = Σ_j f_j / (n · f_i)`.
pub fn balanced_weights(frequencies: &[u64]) -> Result<ClassWeights, Error> {
    if frequencies.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(class) = frequencies.iter().position(|&f| f == 0) {
        return Err(Error::ZeroFrequency(class));
    }
    let total: f64 = frequencies.iter().map(|&f| f as f64).sum();
    let n = frequencies.len() as f64;
    Ok(ClassWeights {
        frequencies: frequencies.to_vec(),
        weights: frequencies.iter().map(|&f| total / (n * f as f64)).collect(),
    })
}

/// Weighted mean negative log-likelihood, `Σ w·nll / Σ w`, over positions
/// whose label is not -100.
pub fn weighted_ce_loss(probabilities: &[Vec<f64>], labels: &[i64], weights: &ClassWeights) -> Result<f64, Error> {
    if probabilities.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} distributions vs {} labels", probabilities.len(), labels.len())));
    }
    let n = weights.num_classes();
    let mut weighted_nll = 0.0;
    let mut weight_sum = 0.0;
    for (pos, (dist, &label)) in probabilities.iter().zip(labels).enumerate() {
        if dist.len() != n {
            return Err(Error::ShapeMismatch(format!("position {pos} has {} classes, expected {n}", dist.len())));
        }
        if ((dist.iter().sum::<f64>()) - 1.0).abs() > NORMALIZATION_TOLERANCE || dist.iter().any(|p| *p < 0.0) {
            return Err(Error::UnnormalizedDistribution(pos));
        }
        if label == IGNORE_INDEX {
            continue;
        }
        let class = usize::try_from(label)
            .ok()
            .filter(|&c| c < n)
            .ok_or_else(|| Error::InvalidInput(format!("label {label} at position {pos} is out of range")))?;
        let w = weights.weights[class];
        weighted_nll += w * -dist[class].ln();
        weight_sum += w;
    }
    if weight_sum == 0.0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(weighted_nll / weight_sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenMetrics {
    pub accuracy: f64,
    /// Micro-averaged over [`POSITIVE_CLASSES`].
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassScores>,
    /// `confusion[gold][pred]`.
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Token-level metrics over three BIO classes, skipping gold -100 positions.
pub fn token_metrics(pred: &[i64], gold: &[i64]) -> Result<TokenMetrics, Error> {
    token_metrics_n(pred, gold, 3)
}

pub fn token_metrics_n(pred: &[i64], gold: &[i64], num_classes: usize) -> Result<TokenMetrics, Error> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch(pred.len(), gold.len()));
    }
    let class_of = |v: i64, what: &str| {
        usize::try_from(v)
            .ok()
            .filter(|&c| c < num_classes)
            .ok_or_else(|| Error::InvalidInput(format!("{what} class {v} out of range")))
    };
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &g) in pred.iter().zip(gold) {
        if g == IGNORE_INDEX {
            continue;
        }
        confusion[class_of(g, "gold")?][class_of(p, "predicted")?] += 1;
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let correct: u64 = (0..num_classes).map(|c| confusion[c][c]).sum();

    let row = |c: usize| confusion[c].iter().sum::<u64>();
    let col = |c: usize| confusion.iter().map(|r| r[c]).sum::<u64>();
    let per_class: Vec<ClassScores> = (0..num_classes)
        .map(|c| {
            let precision = ratio(confusion[c][c], col(c));
            let recall = ratio(confusion[c][c], row(c));
            ClassScores { precision, recall, f1: f1_of(precision, recall), support: row(c) }
        })
        .collect();

    let positives: Vec<usize> = POSITIVE_CLASSES.into_iter().filter(|&c| c < num_classes).collect();
    let tp: u64 = positives.iter().map(|&c| confusion[c][c]).sum();
    let predicted: u64 = positives.iter().map(|&c| col(c)).sum();
    let actual: u64 = positives.iter().map(|&c| row(c)).sum();
    let precision = ratio(tp, predicted);
    let recall = ratio(tp, actual);

    Ok(TokenMetrics {
        accuracy: ratio(correct, total),
        precision,
        recall,
        f1: f1_of(precision, recall),
        per_class,
        confusion,
    })
}

/// The JSON object printed by the `evaluate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class_f1: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl MetricsReport {
    pub fn new(metrics: &TokenMetrics, weights: Option<&ClassWeights>) -> Self {
        Self {
            accuracy: metrics.accuracy,
            precision: metrics.precision,
            recall: metrics.recall,
            f1: metrics.f1,
            per_class_f1: metrics.per_class.iter().map(|c| c.f1).collect(),
            weights: weights.map(|w| w.weights.clone()),
        }
    }
}
