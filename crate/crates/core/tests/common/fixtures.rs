//! Small synthetic crops whose label is a threshold of smoothed noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tseg_core::datapipe::CropSample;

fn box_blur(v: &[f64], size: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for y in 0..size {
        for x in 0..size {
            let (mut s, mut n) = (0.0, 0.0);
            for yy in y.saturating_sub(r)..(y + r + 1).min(size) {
                for xx in x.saturating_sub(r)..(x + r + 1).min(size) {
                    s += v[yy * size + xx];
                    n += 1.0;
                }
            }
            out[y * size + x] = s / n;
        }
    }
    out
}

/// Cloud where the smoothed field is below zero; the image is a kelvin-like
/// brightness with cloud colder than ground.
pub fn noise_crop(seed: u64, size: usize, scene_id: &str, dataset_id: &str) -> CropSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let raw: Vec<f64> = (0..size * size).map(|_| normal.sample(&mut rng)).collect();
    let field = box_blur(&box_blur(&raw, size, 3), size, 3);
    let label: Vec<u8> = field.iter().map(|&f| u8::from(f < 0.0)).collect();
    let image = field.iter().map(|&f| (285.0 + 40.0 * f) as f32).collect();
    CropSample {
        image,
        nodata: vec![false; size * size],
        label,
        scene_id: scene_id.to_string(),
        dataset_id: dataset_id.to_string(),
        origin: (0, 0),
        centroid: (0.0, 0.0),
        size,
    }
}

/// `n` crops from `n` distinct scenes.
pub fn noise_crops(seed: u64, n: usize, size: usize, dataset_id: &str) -> Vec<CropSample> {
    (0..n).map(|i| noise_crop(seed * 1000 + i as u64, size, &format!("{dataset_id}-{i:03}"), dataset_id)).collect()
}
