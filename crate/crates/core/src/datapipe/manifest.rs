use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::{read_band, read_label_pgm, write_band, write_label_pgm};
use super::{BandRaster, CropSample, DataError, DropRecord, FoldPlan, LabelGrid, IGNORE};
use crate::model::NormStats;

/// One crop line of a manifest. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub crop_id: String,
    pub scene_id: String,
    pub dataset_id: String,
    pub origin: [usize; 2],
    pub centroid: [f64; 2],
    pub size: usize,
    pub image: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFooter {
    pub n_crops: usize,
    pub norm_stats: Vec<NormStats>,
    pub drops: Vec<DropRecord>,
    pub content_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct FooterLine {
    footer: ManifestFooter,
}

/// JSON-lines crop list followed by a footer record.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub footer: ManifestFooter,
}

/// SHA-256 over the serialized entry lines in order, then the norm stats.
fn content_hash(entries: &[ManifestEntry], norm_stats: &[NormStats]) -> String {
    let mut h = Sha256::new();
    for e in entries {
        h.update(serde_json::to_string(e).expect("entry serializes"));
        h.update(b"\n");
    }
    h.update(serde_json::to_string(norm_stats).expect("stats serialize"));
    hex::encode(h.finalize())
}

impl DatasetManifest {
    pub fn new(
        entries: Vec<ManifestEntry>,
        norm_stats: Vec<NormStats>,
        drops: Vec<DropRecord>,
        provenance: Option<serde_json::Value>,
    ) -> Self {
        let content_hash = content_hash(&entries, &norm_stats);
        let footer = ManifestFooter { n_crops: entries.len(), norm_stats, drops, content_hash, provenance };
        Self { entries, footer }
    }

    /// Writes every crop as `<dir>/<sub>/<n>.band` + `.pgm` and returns the
    /// manifest describing them (not yet saved). Folds come from `plan`.
    pub fn write_crops(
        dir: &Path,
        sub: &str,
        crops: &[CropSample],
        plan: Option<&FoldPlan>,
        norm_stats: Vec<NormStats>,
        drops: Vec<DropRecord>,
        provenance: Option<serde_json::Value>,
    ) -> Result<Self, DataError> {
        let sub_dir = dir.join(sub);
        fs::create_dir_all(&sub_dir).map_err(|e| DataError::io(&sub_dir, e))?;
        let mut entries = Vec::with_capacity(crops.len());
        for (i, c) in crops.iter().enumerate() {
            let image = format!("{sub}/{i:06}.band");
            let label = format!("{sub}/{i:06}.pgm");
            let raster = BandRaster {
                width: c.size,
                height: c.size,
                gsd_m: 1.0,
                values: c.image.clone(),
                nodata: c.nodata.clone(),
                scene_id: c.scene_id.clone(),
                dataset_id: c.dataset_id.clone(),
                centroid: c.centroid,
            };
            write_band(&dir.join(&image), &raster, None)?;
            write_label_pgm(&dir.join(&label), &LabelGrid::new(c.size, c.size, c.label.clone())?)?;
            entries.push(ManifestEntry {
                crop_id: c.crop_id(),
                scene_id: c.scene_id.clone(),
                dataset_id: c.dataset_id.clone(),
                origin: [c.origin.0, c.origin.1],
                centroid: [c.centroid.0, c.centroid.1],
                size: c.size,
                image,
                label,
                fold: plan.and_then(|p| p.fold_of(&c.scene_id)),
            });
        }
        Ok(Self::new(entries, norm_stats, drops, provenance))
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).map_err(|e| DataError::format(path, e.to_string()))?);
            out.push('\n');
        }
        let footer = FooterLine { footer: self.footer.clone() };
        out.push_str(&serde_json::to_string(&footer).map_err(|e| DataError::format(path, e.to_string()))?);
        out.push('\n');
        fs::write(path, out).map_err(|e| DataError::io(path, e))
    }

    /// Parses and verifies the content hash.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let mut lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let last = lines.pop().ok_or_else(|| DataError::format(path, "empty manifest"))?;
        let footer: FooterLine =
            serde_json::from_str(last).map_err(|e| DataError::format(path, format!("missing or bad footer: {e}")))?;
        let entries = lines
            .iter()
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| DataError::format(path, format!("line {}: {e}", i + 1))))
            .collect::<Result<Vec<ManifestEntry>, _>>()?;
        let m = Self::new(entries, footer.footer.norm_stats.clone(), footer.footer.drops.clone(), footer.footer.provenance.clone());
        if m.footer.content_hash != footer.footer.content_hash || m.footer.n_crops != footer.footer.n_crops {
            return Err(DataError::format(path, "content hash mismatch, manifest was modified"));
        }
        Ok(m)
    }

    /// Reads every crop referenced by the manifest; `base` is the manifest directory.
    pub fn load_crops(&self, base: &Path) -> Result<Vec<CropSample>, DataError> {
        self.entries
            .iter()
            .map(|e| {
                let img_path = base.join(&e.image);
                let r = read_band(&img_path)?;
                let l = read_label_pgm(&base.join(&e.label))?;
                if r.width != e.size || r.height != e.size || l.width != e.size || l.height != e.size {
                    return Err(DataError::format(&img_path, format!("crop {} is not {}x{}", e.crop_id, e.size, e.size)));
                }
                let mut label = l.data;
                for (v, &m) in label.iter_mut().zip(&r.nodata) {
                    if m {
                        *v = IGNORE;
                    }
                }
                Ok(CropSample {
                    image: r.values,
                    nodata: r.nodata,
                    label,
                    scene_id: e.scene_id.clone(),
                    dataset_id: e.dataset_id.clone(),
                    origin: (e.origin[0], e.origin[1]),
                    centroid: (e.centroid[0], e.centroid[1]),
                    size: e.size,
                })
            })
            .collect()
    }

    pub fn norm_stats_for(&self, dataset_id: &str) -> Option<&NormStats> {
        self.footer.norm_stats.iter().find(|s| s.dataset_id == dataset_id)
    }

    /// Scene id of every entry, in order.
    pub fn scene_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.scene_id.clone()).collect()
    }
}
