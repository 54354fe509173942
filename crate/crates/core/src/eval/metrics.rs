use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::grasp::{verdict, Scorer};
use crate::trials::{Dataset, Label, Split};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_value: f64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    /// From the `[tp, fp, fn, tn]` array used by the trainer.
    pub fn from_cells(c: [usize; 4]) -> Self {
        Self::new(c[0] as u64, c[1] as u64, c[2] as u64, c[3] as u64)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted_success: bool, label: Label) {
        match (predicted_success, label) {
            (true, Label::Success) => self.tp += 1,
            (true, Label::Failure) => self.fp += 1,
            (false, Label::Success) => self.fn_ += 1,
            (false, Label::Failure) => self.tn += 1,
        }
    }

    pub fn metrics(&self) -> Result<Metrics> {
        if self.tp + self.fp == 0 {
            return Err(EvalError::UndefinedMetric("precision"));
        }
        if self.tp + self.fn_ == 0 {
            return Err(EvalError::UndefinedMetric("recall"));
        }
        let precision = self.tp as f64 / (self.tp + self.fp) as f64;
        let recall = self.tp as f64 / (self.tp + self.fn_) as f64;
        if precision + recall == 0.0 {
            return Err(EvalError::UndefinedMetric("F-value"));
        }
        Ok(Metrics {
            precision,
            recall,
            f_value: 2.0 * precision * recall / (precision + recall),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub trial: u64,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub matrix: ConfusionMatrix,
    pub metrics: Option<Metrics>,
    pub rows: Vec<ScoreRow>,
    /// Score counts in ten equal bins over [0, 1].
    pub histogram: [u64; 10],
}

/// Discriminates every record of `split` against its simulated label.
pub fn evaluate_records(scorer: &dyn Scorer, dataset: &Dataset, split: Split) -> Result<EvalReport> {
    let records: Vec<_> = dataset.split(split).collect();
    if records.is_empty() {
        return Err(EvalError::InsufficientData(format!("{split:?} split is empty")));
    }
    let rows: Vec<ScoreRow> = records
        .par_iter()
        .map(|r| {
            let image = dataset.image(r)?;
            Ok(ScoreRow {
                trial: r.trial,
                label: r.label,
                score: scorer.score(&image, &r.pose)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut matrix = ConfusionMatrix::default();
    let mut histogram = [0u64; 10];
    for row in &rows {
        matrix.record(verdict(row.score), row.label);
        histogram[((row.score * 10.0) as usize).min(9)] += 1;
    }
    Ok(EvalReport {
        matrix,
        metrics: matrix.metrics().ok(),
        rows,
        histogram,
    })
}
