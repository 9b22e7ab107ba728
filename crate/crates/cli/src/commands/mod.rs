mod data;
mod infer;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tseg_core::datapipe::{CropSample, DatasetManifest};

use crate::args::Command;

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => data::synth(a),
        Command::Prepare(a) => data::prepare(a),
        Command::Folds(a) => data::folds(a),
        Command::Train(a) => train::train(a),
        Command::Eval(a) => train::eval(a),
        Command::Infer(a) => infer::infer(a),
        Command::Bench(a) => infer::bench(a),
        Command::Compare(a) => infer::compare(a),
    }
}

pub(crate) fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Resolved settings and input hashes, embedded in every artifact.
pub(crate) fn provenance(command: &str, config: &impl Serialize, inputs: &[(&Path, String)]) -> Value {
    let inputs: serde_json::Map<String, Value> =
        inputs.iter().map(|(p, h)| (p.display().to_string(), Value::String(h.clone()))).collect();
    json!({
        "tool": "tseg",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "inputs": inputs,
    })
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub(crate) fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

pub(crate) fn load_manifest(path: &Path) -> Result<(DatasetManifest, Vec<CropSample>)> {
    let m = DatasetManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))?;
    let crops = m.load_crops(&manifest_dir(path)).with_context(|| format!("loading crops of {}", path.display()))?;
    Ok((m, crops))
}
