use super::{CropSample, DataError};
use crate::model::NormStats;

pub const STD_FLOOR: f64 = 1e-6;

/// Single-pass (Welford) mean and population std over the valid pixels of
/// the crops belonging to `dataset_id`; other datasets are skipped.
pub fn compute_norm_stats<'a>(crops: impl IntoIterator<Item = &'a CropSample>, dataset_id: &str) -> Result<NormStats, DataError> {
    let (mut n, mut mean, mut m2) = (0u64, 0f64, 0f64);
    for crop in crops.into_iter().filter(|c| c.dataset_id == dataset_id) {
        for (&v, &nd) in crop.image.iter().zip(&crop.nodata) {
            if nd {
                continue;
            }
            n += 1;
            let d = v as f64 - mean;
            mean += d / n as f64;
            m2 += d * (v as f64 - mean);
        }
    }
    if n == 0 {
        return Err(DataError::EmptyDataset(dataset_id.to_string()));
    }
    let std = (m2 / n as f64).sqrt().max(STD_FLOOR);
    Ok(NormStats { dataset_id: dataset_id.to_string(), mean, std })
}

/// `(x - mean) / std` on valid pixels; nodata pixels become 0.
pub fn zscore_apply(image: &[f32], nodata: &[bool], stats: &NormStats) -> Vec<f32> {
    image
        .iter()
        .zip(nodata)
        .map(|(&v, &nd)| if nd { 0.0 } else { ((v as f64 - stats.mean) / stats.std) as f32 })
        .collect()
}
