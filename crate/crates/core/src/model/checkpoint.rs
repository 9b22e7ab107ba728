use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelError, ModelSpec};

const MAGIC: &[u8; 8] = b"TSEGCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Z-score statistics of one dataset, in input units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub dataset_id: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    nbytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    spec: ModelSpec,
    params: Vec<ParamEntry>,
    norm_stats: Vec<NormStats>,
    threshold: f32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

/// A loaded model plus the metadata stored alongside it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub norm_stats: Vec<NormStats>,
    pub threshold: f32,
    pub provenance: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn norm_stats_for(&self, dataset_id: &str) -> Option<&NormStats> {
        self.norm_stats.iter().find(|s| s.dataset_id == dataset_id)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let state = self.model.state();
        let mut params = Vec::with_capacity(state.len());
        let mut blob = Vec::new();
        for s in &state {
            params.push(ParamEntry { name: s.name.clone(), shape: s.shape.clone(), offset: blob.len(), nbytes: s.data.len() * 4 });
            for v in s.data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            spec: self.model.spec().clone(),
            params,
            norm_stats: self.norm_stats.clone(),
            threshold: self.threshold,
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| ModelError::Format(e.to_string()))?;
        let len = u32::try_from(json.len()).map_err(|_| ModelError::Format("manifest exceeds 4 GiB".into()))?;
        let mut out = Vec::with_capacity(12 + json.len() + blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&blob);
        Ok(out)
    }

    /// Parses a checkpoint; nothing is returned unless every entry validates.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let fmt = |m: String| ModelError::Format(m);
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(fmt("bad magic, not a checkpoint file".into()));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(12..12 + len).ok_or_else(|| fmt(format!("manifest length {len} exceeds file size")))?;
        let raw: serde_json::Value = serde_json::from_slice(json).map_err(|e| fmt(format!("manifest is not JSON: {e}")))?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(fmt(format!("unsupported format_version {v} (expected {FORMAT_VERSION})"))),
            None => return Err(fmt("manifest has no format_version".into())),
        }
        let manifest: Manifest = serde_json::from_value(raw).map_err(|e| fmt(format!("malformed manifest: {e}")))?;
        if !(0.0..=1.0).contains(&manifest.threshold) {
            return Err(fmt(format!("threshold {} outside [0, 1]", manifest.threshold)));
        }
        if let Some(s) = manifest.norm_stats.iter().find(|s| !(s.std > 0.0) || !s.mean.is_finite()) {
            return Err(fmt(format!("norm stats for {:?} invalid (std must be > 0)", s.dataset_id)));
        }
        let blob = &bytes[12 + len..];
        let mut model = Model::build(&manifest.spec, 0)?;
        let mut seen = 0;
        for slot in model.state_mut() {
            let entry = manifest
                .params
                .iter()
                .find(|p| p.name == slot.name)
                .ok_or_else(|| fmt(format!("layer {} missing from manifest", slot.name)))?;
            if entry.shape != slot.shape || entry.nbytes != slot.data.len() * 4 {
                return Err(fmt(format!(
                    "layer {}: stored shape {:?} ({} bytes) does not match {:?}",
                    slot.name, entry.shape, entry.nbytes, slot.shape
                )));
            }
            let src = entry
                .offset
                .checked_add(entry.nbytes)
                .and_then(|end| blob.get(entry.offset..end))
                .ok_or_else(|| {
                    fmt(format!(
                        "layer {}: bytes {}..{} lie outside the {}-byte blob",
                        slot.name,
                        entry.offset,
                        entry.offset.saturating_add(entry.nbytes),
                        blob.len()
                    ))
                })?;
            for (d, c) in slot.data.iter_mut().zip(src.chunks_exact(4)) {
                *d = f32::from_le_bytes(c.try_into().expect("4 bytes"));
            }
            seen += 1;
        }
        if seen != manifest.params.len() {
            return Err(fmt(format!("manifest lists {} arrays, model has {seen}", manifest.params.len())));
        }
        Ok(Self { model, norm_stats: manifest.norm_stats, threshold: manifest.threshold, provenance: manifest.provenance })
    }
}

/// Writes `model` and its metadata to `path` (via a temporary file and rename).
pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    norm_stats: &[NormStats],
    threshold: f32,
    provenance: Option<serde_json::Value>,
) -> Result<(), ModelError> {
    let ck = Checkpoint { model: model.clone(), norm_stats: norm_stats.to_vec(), threshold, provenance };
    let bytes = ck.to_bytes()?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
