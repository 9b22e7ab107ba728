use serde::{Deserialize, Serialize};

use super::{TileLayout, TiledError};
use crate::datapipe::{zscore_apply, BandRaster, LabelGrid, IGNORE};
use crate::eval::{accuracy, macro_f1, ConfusionMatrix};
use crate::model::{Checkpoint, Model, NormStats};
use crate::tensor::reflect_index;
use crate::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TiledOutput {
    pub width: usize,
    pub height: usize,
    pub probs: Vec<f32>,
    /// Cloud where `prob >= threshold` on valid pixels.
    pub mask: Vec<bool>,
    pub n_tiles: usize,
    /// Tiles run together per forward pass.
    pub batch_tiles: usize,
    /// Estimated bytes of tile buffers and activations alive at once.
    pub peak_resident_bytes: usize,
}

impl TiledOutput {
    /// Probabilities as a raster on the source grid, sharing its nodata mask.
    pub fn prob_raster(&self, source: &BandRaster) -> Result<BandRaster, TiledError> {
        Ok(BandRaster::new(
            self.width,
            self.height,
            source.gsd_m,
            self.probs.clone(),
            Some(source.nodata.clone()),
            source.scene_id.clone(),
            source.dataset_id.clone(),
            source.centroid,
        )?)
    }
}

fn normalized<'a>(ck: &'a Checkpoint, raster: &BandRaster) -> Result<(Vec<f32>, &'a NormStats), TiledError> {
    raster.validate()?;
    let stats = ck.norm_stats_for(&raster.dataset_id).ok_or_else(|| TiledError::MissingNormStats(raster.dataset_id.clone()))?;
    Ok((zscore_apply(&raster.values, &raster.nodata, stats), stats))
}

/// Largest number of tiles whose working set fits `budget`.
fn tiles_per_batch(model: &Model, layout: &TileLayout, budget: usize) -> Result<(usize, usize), TiledError> {
    let t = layout.tile_size;
    let one = model.activation_bytes(1, t, t);
    if one > budget {
        return Err(TiledError::BudgetTooSmall { budget, minimum: one });
    }
    let mut b = 1;
    while b < layout.n_tiles() && model.activation_bytes(b + 1, t, t) <= budget {
        b += 1;
    }
    Ok((b, model.activation_bytes(b, t, t)))
}

/// Halo-tiled inference; only each tile's core is written to the output.
pub fn infer_tiled(ck: &Checkpoint, raster: &BandRaster, layout: &TileLayout, budget_bytes: usize) -> Result<TiledOutput, TiledError> {
    let order: Vec<usize> = (0..layout.n_tiles()).collect();
    infer_tiled_ordered(ck, raster, layout, budget_bytes, &order)
}

/// [`infer_tiled`] visiting tiles in `order` (a permutation of tile indices).
pub fn infer_tiled_ordered(
    ck: &Checkpoint,
    raster: &BandRaster,
    layout: &TileLayout,
    budget_bytes: usize,
    order: &[usize],
) -> Result<TiledOutput, TiledError> {
    let (w, h) = (raster.width, raster.height);
    if (layout.width, layout.height) != (w, h) {
        return Err(TiledError::InvalidLayout(format!("layout is {}x{} but raster is {w}x{h}", layout.width, layout.height)));
    }
    let mut seen = vec![false; layout.n_tiles()];
    for &i in order {
        if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
            return Err(TiledError::InvalidLayout("tile order is not a permutation".into()));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(TiledError::InvalidLayout("tile order is not a permutation".into()));
    }
    let model = &ck.model;
    layout.check_receptive_field(model.spec())?;
    model.check_input([1, model.spec().input_channels, layout.tile_size, layout.tile_size])?;
    let (norm, _) = normalized(ck, raster)?;
    let (batch, peak) = tiles_per_batch(model, layout, budget_bytes)?;

    let t = layout.tile_size;
    let mut probs = vec![0f32; w * h];
    let mut writes = vec![0u8; w * h];
    for chunk in order.chunks(batch) {
        let mut x = Tensor::zeros([chunk.len(), 1, t, t]);
        for (n, &ti) in chunk.iter().enumerate() {
            let (r0, c0) = layout.tile_origin(&layout.cores[ti]);
            let img = x.image_mut(n);
            for ty in 0..t {
                let sy = reflect_index(r0 + ty as isize, h);
                let row = &norm[sy * w..(sy + 1) * w];
                for (tx, v) in img[ty * t..(ty + 1) * t].iter_mut().enumerate() {
                    *v = row[reflect_index(c0 + tx as isize, w)];
                }
            }
        }
        let y = model.forward(&x)?;
        for (n, &ti) in chunk.iter().enumerate() {
            let core = layout.cores[ti];
            let out = y.image(n);
            for r in 0..core.height {
                let src = (layout.halo + r) * t + layout.halo;
                let dst = (core.row + r) * w + core.col;
                probs[dst..dst + core.width].copy_from_slice(&out[src..src + core.width]);
                for c in &mut writes[dst..dst + core.width] {
                    *c = c.saturating_add(1);
                }
            }
        }
    }
    if let Some(i) = writes.iter().position(|&c| c != 1) {
        return Err(TiledError::Coverage { row: i / w, col: i % w, count: writes[i] });
    }
    let mask = probs.iter().zip(&raster.nodata).map(|(&p, &nd)| !nd && p >= ck.threshold).collect();
    Ok(TiledOutput { width: w, height: h, probs, mask, n_tiles: layout.n_tiles(), batch_tiles: batch, peak_resident_bytes: peak })
}

/// One forward pass over the whole raster, reflect-padded on the bottom and
/// right to the model's size multiple and cropped back afterwards.
pub fn infer_full(model: &Model, raster: &BandRaster, stats: &NormStats) -> Result<Vec<f32>, TiledError> {
    raster.validate()?;
    let (w, h) = (raster.width, raster.height);
    let m = model.spec().required_multiple();
    let (pw, ph) = (w.div_ceil(m) * m, h.div_ceil(m) * m);
    let needed = model.activation_bytes(1, ph, pw);
    let mut probe: Vec<u8> = Vec::new();
    probe.try_reserve_exact(needed).map_err(|_| TiledError::OutOfMemory { needed })?;
    drop(probe);
    let norm = zscore_apply(&raster.values, &raster.nodata, stats);
    let x = Tensor::from_fn([1, 1, ph, pw], |[_, _, y, x]| norm[reflect_index(y as isize, h) * w + reflect_index(x as isize, w)]);
    let y = model.forward(&x)?;
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        out.extend_from_slice(&y.data()[r * pw..r * pw + w]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub full_macro_f1: f64,
    pub tiled_macro_f1: f64,
    pub full_accuracy: f64,
    pub tiled_accuracy: f64,
    /// |tiled - full| in percentage points.
    pub macro_f1_delta_pp: f64,
    pub accuracy_delta_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub width: usize,
    pub height: usize,
    pub max_abs_prob_diff: f64,
    /// Over pixels at least `interior_margin` from every image edge.
    pub interior_max_abs_prob_diff: f64,
    pub interior_margin: usize,
    pub mask_disagreement_rate: f64,
    pub metric_delta: Option<MetricDelta>,
}

fn scores(probs: &[f32], labels: &[u8], threshold: f32) -> Result<(f64, f64), TiledError> {
    let mut cm = ConfusionMatrix::default();
    cm.accumulate_labels(probs, labels, threshold)?;
    Ok((macro_f1(&cm)?, accuracy(&cm)?))
}

/// Runs both paths on `raster` and reports how far apart they are.
pub fn compare_full_vs_tiled(
    ck: &Checkpoint,
    raster: &BandRaster,
    truth: Option<&LabelGrid>,
    budget_bytes: usize,
) -> Result<CompareReport, TiledError> {
    let layout = super::plan_tiles(raster.width, raster.height, super::TILE_SIZE, super::CORE_SIZE)?;
    let tiled = infer_tiled(ck, raster, &layout, budget_bytes)?;
    let (_, stats) = normalized(ck, raster)?;
    let full = infer_full(&ck.model, raster, stats)?;
    let (w, h) = (raster.width, raster.height);
    let margin = layout.halo;
    let (mut max_all, mut max_in, mut disagree) = (0f64, 0f64, 0usize);
    for (i, (&a, &b)) in full.iter().zip(&tiled.probs).enumerate() {
        let d = (a as f64 - b as f64).abs();
        max_all = max_all.max(d);
        let (r, c) = (i / w, i % w);
        if r >= margin && c >= margin && r + margin < h && c + margin < w {
            max_in = max_in.max(d);
        }
        if (a >= ck.threshold) != (b >= ck.threshold) {
            disagree += 1;
        }
    }
    let metric_delta = match truth {
        None => None,
        Some(t) => {
            if (t.width, t.height) != (w, h) {
                return Err(TiledError::InvalidLayout(format!("truth is {}x{} but raster is {w}x{h}", t.width, t.height)));
            }
            let labels: Vec<u8> = t.data.iter().zip(&raster.nodata).map(|(&l, &nd)| if nd { IGNORE } else { l }).collect();
            let (ff, fa) = scores(&full, &labels, ck.threshold)?;
            let (tf, ta) = scores(&tiled.probs, &labels, ck.threshold)?;
            Some(MetricDelta {
                full_macro_f1: ff,
                tiled_macro_f1: tf,
                full_accuracy: fa,
                tiled_accuracy: ta,
                macro_f1_delta_pp: (tf - ff).abs() * 100.0,
                accuracy_delta_pp: (ta - fa).abs() * 100.0,
            })
        }
    };
    Ok(CompareReport {
        width: w,
        height: h,
        max_abs_prob_diff: max_all,
        interior_max_abs_prob_diff: max_in,
        interior_margin: margin,
        mask_disagreement_rate: disagree as f64 / (w * h) as f64,
        metric_delta,
    })
}
