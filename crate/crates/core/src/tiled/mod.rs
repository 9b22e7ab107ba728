//! Halo-tiled full-scene inference, the single-pass reference it is checked
//! against, and a latency benchmark.

mod bench;
mod infer;
mod layout;

pub use bench::{benchmark, machine_descriptor, BenchReport, MachineInfo};
pub use infer::{compare_full_vs_tiled, infer_full, infer_tiled, infer_tiled_ordered, CompareReport, MetricDelta, TiledOutput};
pub use layout::{plan_tiles, Core, TileLayout, CORE_SIZE, DEFAULT_BUDGET_BYTES, TILE_SIZE};

use thiserror::Error;

use crate::datapipe::DataError;
use crate::eval::EvalError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TiledError {
    #[error("invalid tile layout: {0}")]
    InvalidLayout(String),
    #[error("halo of {halo} px is smaller than the model receptive-field radius {radius}")]
    HaloTooSmall { halo: usize, radius: usize },
    #[error("memory budget of {budget} bytes is below the {minimum} bytes one tile needs")]
    BudgetTooSmall { budget: usize, minimum: usize },
    #[error("checkpoint has no normalization statistics for dataset {0:?}")]
    MissingNormStats(String),
    #[error("single-pass inference needs about {needed} bytes, which could not be allocated")]
    OutOfMemory { needed: usize },
    #[error("stitching wrote pixel ({row}, {col}) {count} times")]
    Coverage { row: usize, col: usize, count: u8 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
