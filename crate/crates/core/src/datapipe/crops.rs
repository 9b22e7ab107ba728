use serde::{Deserialize, Serialize};

use super::{resample_labels, resample_to_gsd, BandRaster, DataError, LabelGrid, IGNORE};

pub const CROP_SIZE: usize = 256;
/// Crops with a larger nodata share than this are dropped.
pub const MAX_NODATA_FRACTION: f64 = 0.5;

/// One fixed-size training/evaluation sample cut from a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CropSample {
    pub image: Vec<f32>,
    pub nodata: Vec<bool>,
    /// 0 clear, 1 cloud, [`IGNORE`]; nodata pixels are always ignore and hold 0.0 in `image`.
    pub label: Vec<u8>,
    pub scene_id: String,
    pub dataset_id: String,
    /// (row, col) of the top-left pixel in the scene.
    pub origin: (usize, usize),
    pub centroid: (f64, f64),
    pub size: usize,
}

impl CropSample {
    pub fn crop_id(&self) -> String {
        format!("{}/{}/r{}c{}", self.dataset_id, self.scene_id, self.origin.0, self.origin.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub scene_id: String,
    pub origin: (usize, usize),
    pub nodata_fraction: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CropGrid {
    pub crops: Vec<CropSample>,
    pub drops: Vec<DropRecord>,
}

/// Non-overlapping grid anchored at (0, 0); trailing partial strips are dropped.
pub fn grid_crops(raster: &BandRaster, labels: &LabelGrid, size: usize, stride: usize) -> Result<CropGrid, DataError> {
    raster.validate()?;
    if labels.width != raster.width || labels.height != raster.height {
        return Err(DataError::Invalid(format!(
            "scene {}: labels are {}x{} but imagery is {}x{}",
            raster.scene_id, labels.width, labels.height, raster.width, raster.height
        )));
    }
    if size == 0 || stride == 0 {
        return Err(DataError::Invalid("crop size and stride must be >= 1".into()));
    }
    if raster.width < size || raster.height < size {
        return Err(DataError::TooSmall { scene_id: raster.scene_id.clone(), width: raster.width, height: raster.height, size });
    }
    let mut out = CropGrid::default();
    for r in (0..=raster.height - size).step_by(stride) {
        for c in (0..=raster.width - size).step_by(stride) {
            let mut image = Vec::with_capacity(size * size);
            let mut nodata = Vec::with_capacity(size * size);
            let mut label = Vec::with_capacity(size * size);
            for y in r..r + size {
                let row = y * raster.width;
                image.extend_from_slice(&raster.values[row + c..row + c + size]);
                nodata.extend_from_slice(&raster.nodata[row + c..row + c + size]);
                label.extend_from_slice(&labels.data[row + c..row + c + size]);
            }
            let bad = nodata.iter().filter(|&&m| m).count();
            let frac = bad as f64 / (size * size) as f64;
            if frac > MAX_NODATA_FRACTION {
                out.drops.push(DropRecord { scene_id: raster.scene_id.clone(), origin: (r, c), nodata_fraction: frac });
                continue;
            }
            for ((l, v), &m) in label.iter_mut().zip(image.iter_mut()).zip(&nodata) {
                if m {
                    *l = IGNORE;
                    *v = 0.0;
                }
            }
            out.crops.push(CropSample {
                image,
                nodata,
                label,
                scene_id: raster.scene_id.clone(),
                dataset_id: raster.dataset_id.clone(),
                origin: (r, c),
                centroid: raster.centroid,
                size,
            });
        }
    }
    Ok(out)
}

/// Resamples a labelled scene to `target_gsd_m` (skipped when already there)
/// and cuts the standard crop grid.
pub fn prepare_scene(raster: &BandRaster, labels: &LabelGrid, target_gsd_m: f64) -> Result<CropGrid, DataError> {
    if raster.gsd_m == target_gsd_m {
        return grid_crops(raster, labels, CROP_SIZE, CROP_SIZE);
    }
    let r = resample_to_gsd(raster, target_gsd_m)?;
    let l = resample_labels(labels, r.width, r.height)?;
    grid_crops(&r, &l, CROP_SIZE, CROP_SIZE)
}
