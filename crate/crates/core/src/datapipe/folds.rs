use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::DataError;

pub const DEFAULT_FOLDS: usize = 6;

/// Scene → fold assignment for spatially blocked cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
    pub method: String,
}

impl FoldPlan {
    pub fn fold_of(&self, scene_id: &str) -> Option<usize> {
        self.assignment.get(scene_id).copied()
    }

    pub fn scenes_in(&self, fold: usize) -> Vec<&str> {
        self.assignment.iter().filter(|(_, &f)| f == fold).map(|(s, _)| s.as_str()).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Sorts scenes by (10° latitude band, longitude, id) and cuts the order
/// into `k` contiguous runs; the first `n mod k` runs get one extra scene.
pub fn assign_spatial_folds(scenes: &[(String, (f64, f64))], k: usize) -> Result<FoldPlan, DataError> {
    if k == 0 {
        return Err(DataError::Invalid("fold count must be >= 1".into()));
    }
    let mut seen = BTreeSet::new();
    for (id, (lat, lon)) in scenes {
        if !seen.insert(id.as_str()) {
            return Err(DataError::Invalid(format!("scene {id} listed twice")));
        }
        if !lat.is_finite() || !lon.is_finite() {
            return Err(DataError::Invalid(format!("scene {id} has a non-finite centroid")));
        }
    }
    if scenes.len() < k {
        return Err(DataError::TooFewScenes { n: scenes.len(), k });
    }
    let mut order: Vec<&(String, (f64, f64))> = scenes.iter().collect();
    order.sort_by(|a, b| {
        let band = |lat: f64| (lat / 10.0).floor() as i64;
        band(a.1 .0)
            .cmp(&band(b.1 .0))
            .then(a.1 .1.total_cmp(&b.1 .1))
            .then_with(|| a.0.cmp(&b.0))
    });
    let (base, extra) = (scenes.len() / k, scenes.len() % k);
    let mut assignment = BTreeMap::new();
    let mut it = order.into_iter();
    for fold in 0..k {
        for _ in 0..base + usize::from(fold < extra) {
            let (id, _) = it.next().expect("sizes sum to n");
            assignment.insert(id.clone(), fold);
        }
    }
    Ok(FoldPlan { k, assignment, method: "lat-band-10deg/lon/scene-id contiguous runs".into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenes(n: usize) -> Vec<(String, (f64, f64))> {
        (0..n).map(|i| (format!("s{i:02}"), ((i * 37 % 170) as f64 - 85.0, (i * 53 % 360) as f64 - 180.0))).collect()
    }

    #[test]
    fn twenty_four_scenes_six_folds() {
        let p = assign_spatial_folds(&scenes(24), 6).unwrap();
        assert_eq!(p.fold_sizes(), vec![4; 6]);
    }

    #[test]
    fn twenty_five_scenes() {
        let p = assign_spatial_folds(&scenes(25), 6).unwrap();
        assert_eq!(p.fold_sizes(), vec![5, 4, 4, 4, 4, 4]);
    }

    #[test]
    fn blocks_follow_latitude_bands() {
        let s: Vec<_> = [("a", 5.0, 10.0), ("b", 55.0, -3.0), ("c", 7.0, -50.0), ("d", 51.0, 20.0)]
            .iter()
            .map(|&(id, lat, lon)| (id.to_string(), (lat, lon)))
            .collect();
        let p = assign_spatial_folds(&s, 2).unwrap();
        assert_eq!(p.fold_of("a"), p.fold_of("c"));
        assert_eq!(p.fold_of("b"), p.fold_of("d"));
        assert_ne!(p.fold_of("a"), p.fold_of("b"));
    }

    #[test]
    fn too_few_and_duplicates() {
        assert!(matches!(assign_spatial_folds(&scenes(5), 6), Err(DataError::TooFewScenes { n: 5, k: 6 })));
        let mut s = scenes(8);
        s[3].0 = s[2].0.clone();
        assert!(assign_spatial_folds(&s, 6).is_err());
    }
}
