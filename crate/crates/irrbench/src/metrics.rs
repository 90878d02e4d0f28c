//! Classification metrics: confusion matrix, macro-averaged F1, and the
//! relative performance-loss score used to compare regular vs. irregular
//! evaluation.

use crate::error::{Error, Result};

/// Counts of (truth, prediction) pairs. Row = true class, column = predicted
/// class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
    num_classes: usize,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Result<ConfusionMatrix> {
        if num_classes == 0 {
            return Err(Error::InvalidArgument(
                "confusion matrix needs at least one class".into(),
            ));
        }
        Ok(ConfusionMatrix {
            counts: vec![0; num_classes * num_classes],
            num_classes,
        })
    }

    pub fn from_pairs(truths: &[usize], predictions: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
        if truths.len() != predictions.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} truths but {} predictions",
                truths.len(),
                predictions.len()
            )));
        }
        let mut m = ConfusionMatrix::new(num_classes)?;
        for (&t, &p) in truths.iter().zip(predictions) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, prediction: usize) -> Result<()> {
        if truth >= self.num_classes || prediction >= self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "class pair ({truth}, {prediction}) out of range for {} classes",
                self.num_classes
            )));
        }
        self.counts[truth * self.num_classes + prediction] += 1;
        Ok(())
    }

    pub fn count(&self, truth: usize, prediction: usize) -> u64 {
        self.counts[truth * self.num_classes + prediction]
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.count(class, class)
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.num_classes)
            .filter(|&t| t != class)
            .map(|t| self.count(t, class))
            .sum()
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.num_classes)
            .filter(|&p| p != class)
            .map(|p| self.count(class, p))
            .sum()
    }
}

/// Macro-averaged F1: the unweighted mean over classes of
/// `2 TP / (2 TP + FP + FN)`, with `0/0` scored as 0. Every class counts in
/// the mean, present in the data or not.
pub fn macro_f1(matrix: &ConfusionMatrix) -> f64 {
    let k = matrix.num_classes();
    let mut acc = 0.0;
    for c in 0..k {
        let tp = matrix.true_positives(c) as f64;
        let fp = matrix.false_positives(c) as f64;
        let fn_ = matrix.false_negatives(c) as f64;
        let denom = 2.0 * tp + fp + fn_;
        if denom > 0.0 {
            acc += 2.0 * tp / denom;
        }
    }
    acc / k as f64
}

/// Relative score drop `(p_regular - p_irregular) / p_regular`. Positive
/// when irregularity hurts; negative when it helps.
pub fn performance_loss(p_regular: f64, p_irregular: f64) -> Result<f64> {
    if !p_regular.is_finite() || !p_irregular.is_finite() {
        return Err(Error::NonFinite(format!(
            "scores must be finite, got {p_regular} and {p_irregular}"
        )));
    }
    if p_regular <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "baseline score must be positive to compute a relative loss, got {p_regular}"
        )));
    }
    Ok((p_regular - p_irregular) / p_regular)
}
