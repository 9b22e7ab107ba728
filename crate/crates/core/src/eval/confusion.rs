use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::datapipe::IGNORE;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    #[inline]
    pub fn add(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    /// Counts `probs >= threshold` against labels in {0, 1, [`IGNORE`]}.
    pub fn accumulate_labels(&mut self, probs: &[f32], labels: &[u8], threshold: f32) -> Result<(), EvalError> {
        if probs.len() != labels.len() {
            return Err(EvalError::ShapeMismatch { a: probs.len(), b: labels.len() });
        }
        for (&p, &l) in probs.iter().zip(labels) {
            if l != IGNORE {
                self.add(p >= threshold, l == 1);
            }
        }
        Ok(())
    }
}

/// Counts over pixels not flagged in `ignore`.
pub fn confusion(pred: &[bool], truth: &[bool], ignore: &[bool]) -> Result<ConfusionMatrix, EvalError> {
    if pred.len() != truth.len() || pred.len() != ignore.len() {
        return Err(EvalError::ShapeMismatch { a: pred.len(), b: truth.len().min(ignore.len()) });
    }
    let mut cm = ConfusionMatrix::default();
    for ((&p, &t), &ig) in pred.iter().zip(truth).zip(ignore) {
        if !ig {
            cm.add(p, t);
        }
    }
    Ok(cm)
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// (F1 cloud, F1 clear); a class with no support and no predictions scores 0.
pub fn f1_scores(cm: &ConfusionMatrix) -> Result<(f64, f64), EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok((f1(cm.tp, cm.fp, cm.fn_), f1(cm.tn, cm.fn_, cm.fp)))
}

pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let (a, b) = f1_scores(cm)?;
    Ok((a + b) / 2.0)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok((cm.tp + cm.tn) as f64 / cm.total() as f64)
}
