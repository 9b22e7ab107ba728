//! Synthetic thermal scenes for two missions that observe one shared world.
//!
//! Clouds, surface temperature and cold surface patches are continuous fields
//! over ground coordinates in metres, so a 60 m and a 200 m sensor see the same
//! physics at different sampling. Missions then differ in radiometric gain and
//! offset, sensor noise and where their scenes are located.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{BandRaster, DataError, LabelGrid};

/// Sensor and sampling description of one mission.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub dataset_id: String,
    pub gsd_m: f64,
    pub width: usize,
    pub height: usize,
    /// Observed value = gain * brightness temperature + offset + noise.
    pub gain: f64,
    pub offset: f64,
    pub noise_std: f64,
    /// Candidate (lat range, lon range) boxes scenes are drawn from.
    pub regions: Vec<((f64, f64), (f64, f64))>,
}

impl MissionConfig {
    /// Source mission: 60 m, well calibrated, low noise, global coverage.
    pub fn l7() -> Self {
        Self {
            dataset_id: "l7".into(),
            gsd_m: 60.0,
            width: 860,
            height: 860,
            gain: 1.0,
            offset: 0.0,
            noise_std: 0.4,
            regions: vec![((-60.0, 70.0), (-180.0, 180.0))],
        }
    }

    /// Target mission: native 200 m, noisier, with the gain and offset of an
    /// uncalibrated early-mission detector (about -17 K at 290 K), scenes
    /// clustered over Australia and North America.
    pub fn f2() -> Self {
        Self {
            dataset_id: "f2".into(),
            gsd_m: 200.0,
            width: 512,
            height: 512,
            gain: 0.9,
            offset: 12.0,
            noise_std: 1.0,
            regions: vec![((-38.0, -15.0), (115.0, 150.0)), ((30.0, 55.0), (-125.0, -70.0))],
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix(seed ^ splitmix((ix as u64).wrapping_mul(0x1F1F_1F1F) ^ (iy as u64).rotate_left(32)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Smoothly interpolated lattice noise in [-1, 1], unit cell size.
fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (tx, ty) = (s(x - fx), s(y - fy));
    let a = lattice(seed, ix, iy) + tx * (lattice(seed, ix + 1, iy) - lattice(seed, ix, iy));
    let b = lattice(seed, ix, iy + 1) + tx * (lattice(seed, ix + 1, iy + 1) - lattice(seed, ix, iy + 1));
    a + ty * (b - a)
}

/// Fractal sum of `octaves` noise layers; `scale_m` is the largest feature size.
fn fbm(seed: u64, x_m: f64, y_m: f64, scale_m: f64, octaves: u32) -> f64 {
    let (mut sum, mut amp, mut freq, mut norm) = (0.0, 1.0, 1.0 / scale_m, 0.0);
    for o in 0..octaves {
        sum += amp * value_noise(seed.wrapping_add(o as u64 * 7919), x_m * freq, y_m * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

/// World parameters of one scene, independent of the observing sensor.
#[derive(Debug, Clone)]
struct World {
    seed: u64,
    base_k: f64,
    terrain_amp: f64,
    terrain_scale: f64,
    cold_thr: f64,
    cold_drop: f64,
    cold_scale: f64,
    cloud_thr: f64,
    cloud_scale: f64,
    edge_width: f64,
    cloud_drop: f64,
    texture_amp: f64,
}

impl World {
    fn sample(seed: u64, lat: f64, extent_m: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud_scale = rng.random_range(6_000.0..20_000.0);
        let cloud_frac: f64 = rng.random_range(0.12..0.55);
        let cold_cover: f64 = rng.random_range(0.0..0.25);
        let mut w = World {
            seed,
            base_k: 302.0 - 0.35 * lat.abs() + rng.random_range(-4.0..4.0),
            terrain_amp: rng.random_range(2.0..8.0),
            terrain_scale: rng.random_range(15_000.0..40_000.0),
            cold_thr: 0.0,
            cold_drop: rng.random_range(15.0..40.0),
            cold_scale: rng.random_range(8_000.0..30_000.0),
            cloud_thr: 0.0,
            cloud_scale,
            edge_width: rng.random_range(0.04..0.15),
            cloud_drop: rng.random_range(25.0..55.0),
            texture_amp: rng.random_range(1.5..4.0),
        };
        // thresholds at the requested quantiles of each field over the scene
        w.cloud_thr = quantile(|x, y| w.cloud_field(x, y), extent_m, 1.0 - cloud_frac);
        w.cold_thr = quantile(|x, y| w.cold_field(x, y), extent_m, 1.0 - cold_cover);
        w
    }

    fn cloud_field(&self, x: f64, y: f64) -> f64 {
        fbm(self.seed ^ 0xC10D, x, y, self.cloud_scale, 5)
    }

    fn cold_field(&self, x: f64, y: f64) -> f64 {
        fbm(self.seed ^ 0xC01D, x, y, self.cold_scale, 3)
    }

    /// Brightness temperature (K) and cloud flag at ground point (x, y) metres.
    fn observe(&self, x: f64, y: f64) -> (f64, bool) {
        let mut surface = self.base_k + self.terrain_amp * fbm(self.seed ^ 0x7E44, x, y, self.terrain_scale, 4);
        // cold patches (snow, water, high ground) with soft edges
        let cold = ((self.cold_field(x, y) - self.cold_thr) / 0.05).clamp(0.0, 1.0);
        surface -= cold * self.cold_drop;
        let c = self.cloud_field(x, y) - self.cloud_thr;
        if c <= 0.0 {
            return (surface, false);
        }
        let tau = (c / self.edge_width).min(1.0);
        let emiss = 1.0 - (-3.0 * tau).exp();
        let top = self.base_k - self.cloud_drop + self.texture_amp * fbm(self.seed ^ 0x7E47, x, y, 1_500.0, 3);
        (surface + emiss * (top - surface), true)
    }
}

fn quantile(f: impl Fn(f64, f64) -> f64, extent_m: f64, q: f64) -> f64 {
    let n = 64;
    let mut v: Vec<f64> = (0..n * n)
        .map(|i| f(((i % n) as f64 + 0.5) * extent_m / n as f64, ((i / n) as f64 + 0.5) * extent_m / n as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)]
}

/// One scene of `mission` at its native GSD, with labels on the same grid.
pub fn generate_scene(
    mission: &MissionConfig,
    seed: u64,
    index: usize,
    width: usize,
    height: usize,
) -> Result<(BandRaster, LabelGrid), DataError> {
    let scene_seed = splitmix(seed ^ splitmix(index as u64 ^ 0x5CE7E));
    let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
    let ((la0, la1), (lo0, lo1)) = mission.regions[rng.random_range(0..mission.regions.len())];
    let lat = rng.random_range(la0..la1);
    let lon = rng.random_range(lo0..lo1);
    let extent = width.max(height) as f64 * mission.gsd_m;
    // the world depends on the scene seed only, not on the mission
    let world = World::sample(splitmix(scene_seed ^ 0x3011D), lat, extent);
    let noise = Normal::new(0.0, mission.noise_std).map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut values = Vec::with_capacity(width * height);
    let mut labels = Vec::with_capacity(width * height);
    for py in 0..height {
        for px in 0..width {
            let (bt, cloud) = world.observe((px as f64 + 0.5) * mission.gsd_m, (py as f64 + 0.5) * mission.gsd_m);
            values.push((mission.gain * bt + mission.offset + noise.sample(&mut rng)) as f32);
            labels.push(u8::from(cloud));
        }
    }
    let scene_id = format!("{}-{index:03}", mission.dataset_id);
    let raster = BandRaster::new(width, height, mission.gsd_m, values, None, scene_id, mission.dataset_id.clone(), (lat, lon))?;
    Ok((raster, LabelGrid::new(width, height, labels)?))
}

/// `n` scenes of the mission's default size.
pub fn generate_mission(mission: &MissionConfig, seed: u64, n: usize) -> Result<Vec<(BandRaster, LabelGrid)>, DataError> {
    (0..n).map(|i| generate_scene(mission, seed, i, mission.width, mission.height)).collect()
}
