use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;
use tseg_core::datapipe::synth::{generate_scene, MissionConfig};
use tseg_core::datapipe::{read_band, read_label_pgm, write_band, write_mask_pgm, BandRaster, LabelGrid, STD_FLOOR};
use tseg_core::model::{load_checkpoint, Checkpoint, Model, NormStats};
use tseg_core::tiled::{benchmark, compare_full_vs_tiled, infer_tiled, plan_tiles, CORE_SIZE, TILE_SIZE};

use super::{provenance, sha256_file, write_json};
use crate::args::{BenchArgs, CompareArgs, InferArgs, SceneModelArgs};
use crate::exit::UsageError;

fn budget(mib: usize) -> usize {
    mib.saturating_mul(1 << 20)
}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let parsed = s.split_once(['x', 'X']).and_then(|(w, h)| Some((w.trim().parse().ok()?, h.trim().parse().ok()?)));
    match parsed {
        Some((w, h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => bail!(UsageError(format!("--synthetic expects WIDTHxHEIGHT, got {s:?}"))),
    }
}

fn raster_stats(r: &BandRaster) -> NormStats {
    let valid: Vec<f64> = r.values.iter().zip(&r.nodata).filter(|(_, &nd)| !nd).map(|(&v, _)| v as f64).collect();
    let n = valid.len().max(1) as f64;
    let mean = valid.iter().sum::<f64>() / n;
    let std = (valid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(STD_FLOOR);
    NormStats { dataset_id: r.dataset_id.clone(), mean, std }
}

struct Loaded {
    ck: Checkpoint,
    raster: BandRaster,
    truth: Option<LabelGrid>,
    inputs: Vec<(std::path::PathBuf, String)>,
}

/// Scene from a file or the synthetic generator; model from a checkpoint or
/// a fresh initialization normalized with the scene's own statistics.
fn load_scene_model(a: &SceneModelArgs) -> Result<Loaded> {
    let mut inputs = Vec::new();
    let (raster, truth) = match (&a.input, &a.synthetic) {
        (Some(p), _) => {
            inputs.push((p.clone(), sha256_file(p)?));
            (read_band(p)?, None)
        }
        (None, Some(dims)) => {
            let (w, h) = parse_dims(dims)?;
            let (r, l) = generate_scene(&MissionConfig::f2(), a.seed, 0, w, h)?;
            (r, Some(l))
        }
        (None, None) => bail!(UsageError("need --input <band> or --synthetic WxH".into())),
    };
    let ck = match &a.checkpoint {
        Some(p) => {
            inputs.push((p.clone(), sha256_file(p)?));
            load_checkpoint(p).with_context(|| format!("loading checkpoint {}", p.display()))?
        }
        None => Checkpoint { model: Model::build(&a.spec.spec(), a.seed)?, norm_stats: vec![raster_stats(&raster)], threshold: 0.5, provenance: None },
    };
    Ok(Loaded { ck, raster, truth, inputs })
}

fn input_refs(inputs: &[(std::path::PathBuf, String)]) -> Vec<(&Path, String)> {
    inputs.iter().map(|(p, h)| (p.as_path(), h.clone())).collect()
}

pub fn infer(a: &InferArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint).with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let raster = read_band(&a.input)?;
    let layout = plan_tiles(raster.width, raster.height, TILE_SIZE, CORE_SIZE)?;
    let (gx, gy) = layout.grid();
    eprintln!("{}x{} scene: {} tiles ({gx}x{gy} grid, halo {})", raster.width, raster.height, layout.n_tiles(), layout.halo);
    let out = infer_tiled(&ck, &raster, &layout, budget(a.budget_mib))?;
    eprintln!("{} tiles per batch, peak estimate {:.1} MiB", out.batch_tiles, out.peak_resident_bytes as f64 / (1 << 20) as f64);
    let inputs = [(a.checkpoint.as_path(), sha256_file(&a.checkpoint)?), (a.input.as_path(), sha256_file(&a.input)?)];
    let prov = provenance("infer", a, &inputs);
    for p in std::iter::once(&a.mask).chain(&a.probs) {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    write_mask_pgm(&a.mask, out.width, out.height, &out.mask)?;
    if let Some(p) = &a.probs {
        write_band(p, &out.prob_raster(&raster)?, Some(prov.clone()))?;
    }
    let cloud = out.mask.iter().filter(|&&m| m).count() as f64 / out.mask.len() as f64;
    let sidecar = a.mask.with_file_name(format!("{}.json", a.mask.file_name().expect("mask path").to_string_lossy()));
    write_json(
        &sidecar,
        &json!({
            "width": out.width,
            "height": out.height,
            "n_tiles": out.n_tiles,
            "grid": [gx, gy],
            "batch_tiles": out.batch_tiles,
            "cloud_fraction": cloud,
            "mask_sha256": sha256_file(&a.mask)?,
            "provenance": prov,
        }),
    )?;
    eprintln!("cloud fraction {:.3} -> {}", cloud, a.mask.display());
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let l = load_scene_model(&a.scene)?;
    let layout = plan_tiles(l.raster.width, l.raster.height, TILE_SIZE, CORE_SIZE)?;
    let report = benchmark(&l.ck, &l.raster, &layout, a.reps, budget(a.scene.budget_mib))?;
    eprintln!(
        "{}x{}: {} tiles, median {:.3} s over {} reps ({:.1} ms/tile) on {}",
        report.width,
        report.height,
        report.n_tiles,
        report.median_wall_time_s,
        report.repetitions,
        report.per_tile_time_s * 1e3,
        report.machine.cpu
    );
    if let Some(out) = &a.out {
        write_json(out, &json!({ "bench": report, "provenance": provenance("bench", a, &input_refs(&l.inputs)) }))?;
    }
    Ok(())
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let l = load_scene_model(&a.scene)?;
    let mut inputs = l.inputs.clone();
    let truth = match &a.truth {
        Some(p) => {
            inputs.push((p.clone(), sha256_file(p)?));
            Some(read_label_pgm(p)?)
        }
        None => l.truth,
    };
    let report = compare_full_vs_tiled(&l.ck, &l.raster, truth.as_ref(), budget(a.scene.budget_mib))?;
    eprintln!(
        "max |Δp| {:.3e} overall, {:.3e} beyond {} px of the border; mask disagreement {:.5}",
        report.max_abs_prob_diff, report.interior_max_abs_prob_diff, report.interior_margin, report.mask_disagreement_rate
    );
    if let Some(d) = &report.metric_delta {
        eprintln!("macro F1 full {:.4} tiled {:.4} (Δ {:.3} pp)", d.full_macro_f1, d.tiled_macro_f1, d.macro_f1_delta_pp);
    }
    if let Some(out) = &a.out {
        write_json(out, &json!({ "compare": report, "provenance": provenance("compare", a, &input_refs(&inputs)) }))?;
    }
    Ok(())
}
