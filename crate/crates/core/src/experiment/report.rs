//! Comparison table across experiment results.

use serde::{Deserialize, Serialize};

use super::{ExperimentResult, FusionMode, MeanStd};
use crate::classifier::HeadKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: FusionMode,
    pub head: HeadKind,
    pub folds: usize,
    pub test_accuracy: MeanStd,
    pub test_macro_f1: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

fn head_rank(h: HeadKind) -> u8 {
    match h {
        HeadKind::Cnn => 0,
        HeadKind::Fcn => 1,
    }
}

/// Rows in fixed method order. Results must come from the same dataset,
/// split mode and training settings, and no (method, head) pair may
/// appear twice.
pub fn report(results: &[ExperimentResult]) -> Result<Report> {
    let Some(first) = results.first() else {
        return Err(Error::InvalidInput("no results to report".into()));
    };
    for r in &results[1..] {
        if r.dataset != first.dataset
            || r.split_mode != first.split_mode
            || r.prescale != first.prescale
        {
            return Err(Error::Validation(format!(
                "{} result was produced on a different dataset or split than {}",
                r.method, first.method
            )));
        }
        if r.config.train != first.config.train {
            return Err(Error::Validation(format!(
                "{} result used different training settings than {}",
                r.method, first.method
            )));
        }
    }
    let mut rows: Vec<ReportRow> = results
        .iter()
        .map(|r| ReportRow {
            method: r.method,
            head: r.head,
            folds: r.folds.len(),
            test_accuracy: r.summary.test_accuracy,
            test_macro_f1: r.summary.test_macro_f1,
        })
        .collect();
    rows.sort_by_key(|r| (r.method, head_rank(r.head)));
    if let Some(w) = rows
        .windows(2)
        .find(|w| w[0].method == w[1].method && w[0].head == w[1].head)
    {
        return Err(Error::Validation(format!(
            "two results for {} with the {:?} head",
            w[0].method, w[0].head
        )));
    }
    Ok(Report { rows })
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8} {:<5} {:>5}  {:>16}  {:>16}\n",
            "method", "head", "folds", "accuracy", "macro-F1"
        );
        let cell = |m: &MeanStd| format!("{:.2} ± {:.2}", m.mean, m.std);
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:<5} {:>5}  {:>16}  {:>16}\n",
                r.method.as_str(),
                r.head.as_str(),
                r.folds,
                cell(&r.test_accuracy),
                cell(&r.test_macro_f1)
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
