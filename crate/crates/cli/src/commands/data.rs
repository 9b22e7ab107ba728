use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tseg_core::datapipe::synth::{generate_mission, MissionConfig};
use tseg_core::datapipe::{
    assign_spatial_folds, compute_norm_stats, prepare_scene, read_band, read_label_pgm, write_band, write_label_pgm, CropSample,
    DataError, DatasetManifest, FoldPlan,
};

use super::{load_manifest, manifest_dir, provenance, read_json, sha256_file, write_json};
use crate::args::{FoldsArgs, MissionArg, PrepareArgs, SynthArgs};
use crate::exit::UsageError;

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut mission = match a.mission {
        MissionArg::L7 => MissionConfig::l7(),
        MissionArg::F2 => MissionConfig::f2(),
    };
    mission.width = a.width.unwrap_or(mission.width);
    mission.height = a.height.unwrap_or(mission.height);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let prov = provenance("synth", a, &[]);
    for (raster, labels) in generate_mission(&mission, a.seed, a.scenes)? {
        write_band(&a.out.join(format!("{}.band", raster.scene_id)), &raster, Some(prov.clone()))?;
        write_label_pgm(&a.out.join(format!("{}.label.pgm", raster.scene_id)), &labels)?;
    }
    eprintln!("wrote {} {} scenes to {}", a.scenes, mission.dataset_id, a.out.display());
    Ok(())
}

fn scene_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "band"));
    files.sort();
    Ok(files)
}

/// (scene id, centroid) in first-appearance order.
fn scenes_of(crops: &[CropSample]) -> Vec<(String, (f64, f64))> {
    let mut out: Vec<(String, (f64, f64))> = Vec::new();
    for c in crops {
        if !out.iter().any(|(s, _)| *s == c.scene_id) {
            out.push((c.scene_id.clone(), c.centroid));
        }
    }
    out
}

pub fn prepare(a: &PrepareArgs) -> Result<()> {
    if !(a.target_gsd > 0.0) {
        bail!(UsageError(format!("--target-gsd must be > 0, got {}", a.target_gsd)));
    }
    let files = scene_files(&a.scenes_dir)?;
    if files.is_empty() {
        bail!(DataError::EmptyDataset(format!("no .band scenes in {}", a.scenes_dir.display())));
    }
    let mut crops = Vec::new();
    let mut drops = Vec::new();
    let mut inputs = Vec::new();
    for path in &files {
        let mut raster = read_band(path)?;
        let stem = path.file_stem().expect("listed file").to_string_lossy().to_string();
        let label_path = path.with_file_name(format!("{stem}.label.pgm"));
        if !label_path.exists() {
            bail!(DataError::Invalid(format!("scene {}: missing label file {}", raster.scene_id, label_path.display())));
        }
        let labels = read_label_pgm(&label_path)?;
        raster.dataset_id = a.dataset_id.clone();
        let grid = prepare_scene(&raster, &labels, a.target_gsd).with_context(|| format!("scene {}", raster.scene_id))?;
        crops.extend(grid.crops);
        drops.extend(grid.drops);
        inputs.push((path.clone(), sha256_file(path)?));
        inputs.push((label_path.clone(), sha256_file(&label_path)?));
    }
    let stats = compute_norm_stats(&crops, &a.dataset_id)?;
    let plan = a.folds_k.map(|k| assign_spatial_folds(&scenes_of(&crops), k)).transpose()?;
    let inputs: Vec<(&Path, String)> = inputs.iter().map(|(p, h)| (p.as_path(), h.clone())).collect();
    let prov = provenance("prepare", a, &inputs);
    let stem = a.out.file_stem().map_or_else(|| "manifest".into(), |s| s.to_string_lossy().to_string());
    let dir = manifest_dir(&a.out);
    let manifest = DatasetManifest::write_crops(&dir, &format!("{stem}_crops"), &crops, plan.as_ref(), vec![stats], drops, Some(prov))?;
    manifest.save(&a.out)?;
    eprintln!(
        "{} crops from {} scenes ({} dropped), hash {} -> {}",
        manifest.footer.n_crops,
        files.len(),
        manifest.footer.drops.len(),
        manifest.footer.content_hash,
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FoldPlanFile {
    plan: FoldPlan,
    #[serde(default)]
    provenance: Value,
}

pub fn read_fold_plan(path: &Path) -> Result<FoldPlan> {
    Ok(read_json::<FoldPlanFile>(path)?.plan)
}

pub fn scene_plan(crops: &[CropSample], k: usize) -> Result<FoldPlan> {
    Ok(assign_spatial_folds(&scenes_of(crops), k)?)
}

pub fn folds(a: &FoldsArgs) -> Result<()> {
    let (m, crops) = load_manifest(&a.manifest)?;
    let plan = scene_plan(&crops, a.k)?;
    let prov = provenance("folds", a, &[(a.manifest.as_path(), m.footer.content_hash.clone())]);
    write_json(&a.out, &FoldPlanFile { plan: plan.clone(), provenance: prov })?;
    eprintln!("{} scenes in {} folds, sizes {:?} -> {}", plan.assignment.len(), plan.k, plan.fold_sizes(), a.out.display());
    Ok(())
}
