//! Binary classification metrics: ROC-AUC, accuracy and F1.
//!
//! AUC uses the rank formulation with midranks for tied scores, which is
//! exactly the probability that a random positive outscores a random
//! negative (ties counting half). Accuracy and F1 threshold the score at
//! 0.5.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub auc: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub positives: usize,
    pub negatives: usize,
}

fn check_inputs(labels: &[f64], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.is_empty() || labels.len() != scores.len() {
        return Err(Error::EmptySample("metrics need equal-length, non-empty inputs"));
    }
    let pos = labels.iter().filter(|&&y| y == 1.0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassMetric);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve via the Mann-Whitney rank statistic.
pub fn auc(labels: &[f64], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check_inputs(labels, scores)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("scores must not be NaN"));

    // midrank assignment over runs of equal scores
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the midrank
        let midrank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1.0 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }

    let pos_f = pos as f64;
    Ok((rank_sum_pos - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg as f64))
}

/// Accuracy and F1 of the 0.5-thresholded classifier, plus AUC, in one
/// report.
pub fn classification_report(labels: &[f64], scores: &[f64]) -> Result<ClassificationReport> {
    let (pos, neg) = check_inputs(labels, scores)?;

    let (mut tp, mut tn, mut fp, mut fne) = (0usize, 0usize, 0usize, 0usize);
    for (&y, &s) in labels.iter().zip(scores) {
        let pred = s >= 0.5;
        match (y == 1.0, pred) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
            (true, false) => fne += 1,
        }
    }
    let accuracy = (tp + tn) as f64 / labels.len() as f64;
    let f1 = if tp == 0 {
        0.0
    } else {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fne) as f64;
        2.0 * precision * recall / (precision + recall)
    };

    Ok(ClassificationReport {
        auc: auc(labels, scores)?,
        accuracy,
        f1,
        positives: pos,
        negatives: neg,
    })
}
