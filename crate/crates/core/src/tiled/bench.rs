use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{infer_tiled, TileLayout, TiledError};
use crate::datapipe::BandRaster;
use crate::model::Checkpoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub cpu: String,
    pub threads: usize,
}

/// Best-effort description of the host CPU.
pub fn machine_descriptor() -> MachineInfo {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| s.lines().find(|l| l.starts_with("model name")).and_then(|l| l.split(':').nth(1)).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| "unknown".into());
    MachineInfo {
        os: std::env::consts::OS.into(),
        arch: std::env::consts::ARCH.into(),
        cpu,
        threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub n_tiles: usize,
    pub batch_tiles: usize,
    pub repetitions: usize,
    pub wall_times_s: Vec<f64>,
    pub median_wall_time_s: f64,
    pub per_tile_time_s: f64,
    pub peak_resident_estimate_bytes: usize,
    pub budget_bytes: usize,
    /// SHA-256 of the probability bytes; equal across repetitions.
    pub output_digest: String,
    pub machine: MachineInfo,
}

fn digest(probs: &[f32]) -> String {
    let mut h = Sha256::new();
    for p in probs {
        h.update(p.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Median wall time of `repetitions` tiled runs after one untimed warm-up.
/// Fails if any repetition's output differs from the warm-up's.
pub fn benchmark(
    ck: &Checkpoint,
    raster: &BandRaster,
    layout: &TileLayout,
    repetitions: usize,
    budget_bytes: usize,
) -> Result<BenchReport, TiledError> {
    let warm = infer_tiled(ck, raster, layout, budget_bytes)?;
    let reference = digest(&warm.probs);
    let mut times = Vec::with_capacity(repetitions.max(1));
    for _ in 0..repetitions.max(1) {
        let t = Instant::now();
        let out = infer_tiled(ck, raster, layout, budget_bytes)?;
        times.push(t.elapsed().as_secs_f64());
        if digest(&out.probs) != reference {
            return Err(TiledError::InvalidLayout("tiled output changed between repetitions".into()));
        }
    }
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    Ok(BenchReport {
        width: raster.width,
        height: raster.height,
        n_tiles: layout.n_tiles(),
        batch_tiles: warm.batch_tiles,
        repetitions: n,
        wall_times_s: times,
        median_wall_time_s: median,
        per_tile_time_s: median / layout.n_tiles() as f64,
        peak_resident_estimate_bytes: warm.peak_resident_bytes,
        budget_bytes,
        output_digest: reference,
        machine: machine_descriptor(),
    })
}
