//! Accuracy, per-class precision/recall/F1 and macro-F1, all in percent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<u64>>,
}

/// A ratio with a zero denominator counts as 0.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate(predicted: &[usize], labels: &[usize], n_classes: usize) -> Result<MetricsReport> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty split".into()));
    }
    if predicted.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    if let Some(bad) = predicted.iter().chain(labels).find(|&&c| c >= n_classes) {
        return Err(Error::InvalidInput(format!(
            "class {bad} out of range for {n_classes} classes"
        )));
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in predicted.iter().zip(labels) {
        confusion[t][p] += 1;
    }
    let correct: u64 = (0..n_classes).map(|c| confusion[c][c]).sum();
    let per_class: Vec<ClassMetrics> = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c];
            let support: u64 = confusion[c].iter().sum();
            let predicted_c: u64 = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted_c);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision: 100.0 * precision,
                recall: 100.0 * recall,
                f1: 100.0 * f1,
                support,
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / n_classes as f64;
    Ok(MetricsReport {
        accuracy: 100.0 * correct as f64 / labels.len() as f64,
        macro_f1,
        per_class,
        confusion,
    })
}
