use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    /// x = recall, y = precision, summary = AP.
    Pr,
    /// x = false positive rate, y = true positive rate, summary = AUC.
    Roc,
}

/// One operating point per unique score, thresholds descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub kind: CurveKind,
    pub thresholds: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub summary: f64,
}

/// Cumulative (tp, fp) after admitting every score >= each unique threshold.
fn sweep(scores: &[f32], truth: &[bool], ignore: &[bool]) -> Result<(Vec<f64>, Vec<(u64, u64)>, u64, u64), EvalError> {
    if scores.len() != truth.len() || scores.len() != ignore.len() {
        return Err(EvalError::ShapeMismatch { a: scores.len(), b: truth.len().min(ignore.len()) });
    }
    let mut pairs: Vec<(f32, bool)> =
        scores.iter().zip(truth).zip(ignore).filter(|(_, &ig)| !ig).map(|((&s, &t), _)| (s, t)).collect();
    let pos = pairs.iter().filter(|p| p.1).count() as u64;
    let neg = pairs.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::DegenerateLabels);
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut thresholds = Vec::new();
    let mut counts = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < pairs.len() {
        let t = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == t {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(t as f64);
        counts.push((tp, fp));
    }
    Ok((thresholds, counts, pos, neg))
}

/// Precision/recall at every unique score; AP by the rectangle rule
/// `sum (R_i - R_{i-1}) P_i` with `R_0 = 0`.
pub fn pr_curve_ap(scores: &[f32], truth: &[bool], ignore: &[bool]) -> Result<CurveSeries, EvalError> {
    let (thresholds, counts, pos, _) = sweep(scores, truth, ignore)?;
    let mut x = Vec::with_capacity(counts.len());
    let mut y = Vec::with_capacity(counts.len());
    let (mut ap, mut prev_r) = (0.0, 0.0);
    for &(tp, fp) in &counts {
        let r = tp as f64 / pos as f64;
        let p = tp as f64 / (tp + fp) as f64;
        ap += (r - prev_r) * p;
        prev_r = r;
        x.push(r);
        y.push(p);
    }
    Ok(CurveSeries { kind: CurveKind::Pr, thresholds, x, y, summary: ap })
}

/// ROC points from (0, 0) through every unique score; AUC by trapezoids.
pub fn roc_curve_auc(scores: &[f32], truth: &[bool], ignore: &[bool]) -> Result<CurveSeries, EvalError> {
    let (mut thresholds, counts, pos, neg) = sweep(scores, truth, ignore)?;
    thresholds.insert(0, f64::INFINITY);
    let mut x = vec![0.0];
    let mut y = vec![0.0];
    let mut auc = 0.0;
    for &(tp, fp) in &counts {
        let (fx, ty) = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        auc += (fx - x[x.len() - 1]) * (ty + y[y.len() - 1]) / 2.0;
        x.push(fx);
        y.push(ty);
    }
    Ok(CurveSeries { kind: CurveKind::Roc, thresholds, x, y, summary: auc })
}
