//! Raster ingestion, GSD resampling, crop gridding, normalization statistics,
//! spatially blocked folds, experiment splits and dataset manifests.

mod crops;
mod folds;
mod io;
mod manifest;
mod norm;
mod raster;
mod resample;
mod splits;
pub mod synth;

pub use crops::{grid_crops, prepare_scene, CropGrid, CropSample, DropRecord, CROP_SIZE, MAX_NODATA_FRACTION};
pub use folds::{assign_spatial_folds, FoldPlan, DEFAULT_FOLDS};
pub use io::{read_band, read_label_pgm, read_pgm16, write_band, write_label_pgm, write_mask_pgm};
pub use manifest::{DatasetManifest, ManifestEntry, ManifestFooter};
pub use norm::{compute_norm_stats, zscore_apply, STD_FLOOR};
pub use raster::{BandRaster, LabelGrid, IGNORE};
pub use resample::{resample_labels, resample_to_gsd};
pub use splits::{build_experiment_splits, l7_scene_split, CropRef, Experiment, Mission, SplitSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("resampling {from_w}x{from_h} to {gsd} m gives an empty raster")]
    DegenerateOutput { from_w: usize, from_h: usize, gsd: f64 },
    #[error("raster {scene_id} is {width}x{height}, smaller than one {size}x{size} crop")]
    TooSmall { scene_id: String, width: usize, height: usize, size: usize },
    #[error("no valid pixels to compute statistics for dataset {0}")]
    EmptyDataset(String),
    #[error("{n} scene(s) cannot fill {k} folds")]
    TooFewScenes { n: usize, k: usize },
    #[error("experiment {0} needs the {1} manifest")]
    MissingManifest(&'static str, &'static str),
    #[error("fold {fold} out of range for {k} folds")]
    BadFold { fold: usize, k: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error("i/o error on {path}")]
    Io { path: String, source: std::io::Error },
}

impl DataError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn format(path: &std::path::Path, reason: impl Into<String>) -> Self {
        Self::Format { path: path.display().to_string(), reason: reason.into() }
    }
}
