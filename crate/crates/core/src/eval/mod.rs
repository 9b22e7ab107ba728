//! Pixel-level binary segmentation metrics (cloud = positive class).

mod confusion;
mod curves;
mod report;

pub use confusion::{accuracy, confusion, f1_scores, macro_f1, ConfusionMatrix};
pub use curves::{pr_curve_ap, roc_curve_auc, CurveKind, CurveSeries};
pub use report::{aggregate_folds, evaluate_pixels, write_curve_csv, AggregateReport, Dispersion, MetricsReport, ZERO_DIVISION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {a} vs {b} pixels")]
    ShapeMismatch { a: usize, b: usize },
    #[error("confusion matrix is empty (every pixel ignored)")]
    EmptyMatrix,
    #[error("curve needs at least one positive and one negative pixel")]
    DegenerateLabels,
    #[error("no reports to aggregate")]
    NoReports,
    #[error("i/o error on {path}")]
    Io { path: String, source: std::io::Error },
}
