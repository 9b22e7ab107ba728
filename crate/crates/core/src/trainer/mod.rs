//! BCE/Adam training with early stopping and the experiment driver.

mod adam;
mod cv;
mod loss;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use cv::{evaluate_checkpoint, run_cv, run_experiment, CvData, CvOutcome, RunOutcome};
pub use loss::bce_with_logits;
pub use train::{predict_crops, train, train_norm_stats, EpochRecord, TrainConfig, TrainOutcome, TrainReport, TrainTiming};

use thiserror::Error;

use crate::datapipe::DataError;
use crate::eval::EvalError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("every pixel in the batch is ignored")]
    AllIgnored,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no normalization statistics for dataset {0:?}")]
    MissingNormStats(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
