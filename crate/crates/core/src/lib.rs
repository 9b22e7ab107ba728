//! Single-band thermal cloud segmentation.
//!
//! The crate covers the whole pipeline: a small CPU tensor library with
//! hand-written backward kernels ([`tensor`]), a compact UNet with a freezable
//! depthwise-separable encoder ([`model`]), raster ingestion, GSD resampling
//! and spatially blocked folds ([`datapipe`]), BCE/Adam training and the
//! cross-mission experiment driver ([`trainer`]), pixel metrics ([`eval`]) and
//! memory-bounded halo-tiled inference ([`tiled`]).

pub mod datapipe;
pub mod eval;
pub mod model;
pub mod tensor;
pub mod tiled;
pub mod trainer;

pub use tensor::{Param, Tensor, TensorError};
