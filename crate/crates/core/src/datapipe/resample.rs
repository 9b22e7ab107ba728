use super::{BandRaster, DataError, LabelGrid};
use crate::tensor::bilinear_taps;

fn target_dims(raster: &BandRaster, target_gsd_m: f64) -> Result<(usize, usize), DataError> {
    if !(target_gsd_m > 0.0 && target_gsd_m.is_finite()) {
        return Err(DataError::Invalid(format!("target gsd must be > 0, got {target_gsd_m}")));
    }
    let ratio = raster.gsd_m / target_gsd_m;
    let w = (raster.width as f64 * ratio).round() as usize;
    let h = (raster.height as f64 * ratio).round() as usize;
    if w == 0 || h == 0 {
        return Err(DataError::DegenerateOutput { from_w: raster.width, from_h: raster.height, gsd: target_gsd_m });
    }
    Ok((w, h))
}

/// Bilinear (half-pixel centers) resampling to a new ground sampling distance.
/// An output pixel is nodata when any input pixel with nonzero weight is.
pub fn resample_to_gsd(raster: &BandRaster, target_gsd_m: f64) -> Result<BandRaster, DataError> {
    raster.validate()?;
    let (w, h) = target_dims(raster, target_gsd_m)?;
    let tx = bilinear_taps(raster.width, w);
    let ty = bilinear_taps(raster.height, h);
    let sw = raster.width;
    let mut values = vec![0f32; w * h];
    let mut nodata = vec![false; w * h];
    for (oy, t) in ty.iter().enumerate() {
        let rows = [(t.lo, 1.0 - t.frac), (t.hi, t.frac)];
        for (ox, s) in tx.iter().enumerate() {
            let cols = [(s.lo, 1.0 - s.frac), (s.hi, s.frac)];
            let mut acc = 0f64;
            let mut bad = false;
            for &(y, wy) in &rows {
                for &(x, wx) in &cols {
                    let wgt = wy * wx;
                    if wgt == 0.0 {
                        continue;
                    }
                    let i = y * sw + x;
                    bad |= raster.nodata[i];
                    acc += wgt * raster.values[i] as f64;
                }
            }
            let o = oy * w + ox;
            nodata[o] = bad;
            values[o] = if bad { 0.0 } else { acc as f32 };
        }
    }
    Ok(BandRaster {
        width: w,
        height: h,
        gsd_m: target_gsd_m,
        values,
        nodata,
        scene_id: raster.scene_id.clone(),
        dataset_id: raster.dataset_id.clone(),
        centroid: raster.centroid,
    })
}

/// Nearest-neighbour label resampling onto the grid [`resample_to_gsd`]
/// produces for a raster of the same size.
pub fn resample_labels(labels: &LabelGrid, out_w: usize, out_h: usize) -> Result<LabelGrid, DataError> {
    if out_w == 0 || out_h == 0 {
        return Err(DataError::Invalid("label resample to an empty grid".into()));
    }
    let near = |i: usize, n_in: usize, n_out: usize| (((i as f64 + 0.5) * n_in as f64 / n_out as f64) as usize).min(n_in - 1);
    let mut data = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let y = near(oy, labels.height, out_h);
        for ox in 0..out_w {
            data.push(labels.data[y * labels.width + near(ox, labels.width, out_w)]);
        }
    }
    LabelGrid::new(out_w, out_h, data)
}
