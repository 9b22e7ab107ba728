use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{accuracy, macro_f1, pr_curve_ap, roc_curve_auc, ConfusionMatrix, CurveSeries, EvalError};
use crate::datapipe::IGNORE;

/// Recorded in every report: how a class with an empty F1 denominator scores.
pub const ZERO_DIVISION: &str = "f1 of a class with no support and no predictions is 0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub experiment: String,
    pub fold: Option<usize>,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// Absent when the evaluated pixels hold only one class.
    pub ap: Option<f64>,
    pub auc: Option<f64>,
    pub cm: ConfusionMatrix,
    pub threshold: f32,
    pub thresholds_ref: Option<String>,
    pub zero_division: String,
}

/// Pools every non-ignored pixel, binarizes at `threshold` and computes all
/// metrics plus the PR and ROC curves (curves are `None` for one-class data).
pub fn evaluate_pixels(
    experiment: &str,
    fold: Option<usize>,
    probs: &[f32],
    labels: &[u8],
    threshold: f32,
) -> Result<(MetricsReport, Option<(CurveSeries, CurveSeries)>), EvalError> {
    let mut cm = ConfusionMatrix::default();
    cm.accumulate_labels(probs, labels, threshold)?;
    let truth: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
    let ignore: Vec<bool> = labels.iter().map(|&l| l == IGNORE).collect();
    let curves = match (pr_curve_ap(probs, &truth, &ignore), roc_curve_auc(probs, &truth, &ignore)) {
        (Ok(pr), Ok(roc)) => Some((pr, roc)),
        (Err(EvalError::DegenerateLabels), _) | (_, Err(EvalError::DegenerateLabels)) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let report = MetricsReport {
        experiment: experiment.to_string(),
        fold,
        macro_f1: macro_f1(&cm)?,
        accuracy: accuracy(&cm)?,
        ap: curves.as_ref().map(|c| c.0.summary),
        auc: curves.as_ref().map(|c| c.1.summary),
        cm,
        threshold,
        thresholds_ref: None,
        zero_division: ZERO_DIVISION.to_string(),
    };
    Ok((report, curves))
}

/// Writes `threshold,x,y` rows. Long curves are thinned to at most
/// `max_points` evenly spaced points, always keeping both ends.
pub fn write_curve_csv(path: &Path, curve: &CurveSeries, max_points: usize) -> Result<(), EvalError> {
    let n = curve.x.len();
    let keep: Vec<usize> = if n <= max_points.max(2) {
        (0..n).collect()
    } else {
        let m = max_points.max(2);
        let mut idx: Vec<usize> = (0..m).map(|i| i * (n - 1) / (m - 1)).collect();
        idx.dedup();
        idx
    };
    let (xn, yn) = match curve.kind {
        super::CurveKind::Pr => ("recall", "precision"),
        super::CurveKind::Roc => ("fpr", "tpr"),
    };
    let mut out = format!("threshold,{xn},{yn}\n");
    for i in keep {
        let _ = writeln!(out, "{},{},{}", curve.thresholds[i], curve.x[i], curve.y[i]);
    }
    fs::write(path, out).map_err(|source| EvalError::Io { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (n - 1); 0 for a single value.
    pub std: f64,
}

impl Dispersion {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        // shifted by the first value so identical inputs give that value exactly
        let mean = values[0] + values.iter().map(|v| v - values[0]).sum::<f64>() / n;
        let std = if values.len() < 2 { 0.0 } else { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self { mean, min, max, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub experiment: String,
    pub n_folds: usize,
    pub macro_f1: Dispersion,
    pub accuracy: Dispersion,
    pub ap: Option<Dispersion>,
    pub auc: Option<Dispersion>,
    pub folds: Vec<MetricsReport>,
}

/// Unweighted mean over folds with min/max/std dispersion.
pub fn aggregate_folds(reports: &[MetricsReport]) -> Result<AggregateReport, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    let col = |f: fn(&MetricsReport) -> f64| Dispersion::of(&reports.iter().map(f).collect::<Vec<_>>()).expect("non-empty");
    let opt = |f: fn(&MetricsReport) -> Option<f64>| {
        reports.iter().map(f).collect::<Option<Vec<f64>>>().and_then(|v| Dispersion::of(&v))
    };
    Ok(AggregateReport {
        experiment: first.experiment.clone(),
        n_folds: reports.len(),
        macro_f1: col(|r| r.macro_f1),
        accuracy: col(|r| r.accuracy),
        ap: opt(|r| r.ap),
        auc: opt(|r| r.auc),
        folds: reports.to_vec(),
    })
}
