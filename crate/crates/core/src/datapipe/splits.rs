use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, FoldPlan};

/// Source (`L7`, 60 m) and target (`F2`, 200 m) missions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mission {
    L7,
    F2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    F2f2,
    L7l7,
    L7f2,
    Jointf2,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Experiment::F2f2, Experiment::L7l7, Experiment::L7f2, Experiment::Jointf2];

    pub fn name(self) -> &'static str {
        match self {
            Self::F2f2 => "f2f2",
            Self::L7l7 => "l7l7",
            Self::L7f2 => "l7f2",
            Self::Jointf2 => "jointf2",
        }
    }

    /// Whether the experiment rotates over F2 folds.
    pub fn uses_folds(self) -> bool {
        matches!(self, Self::F2f2 | Self::Jointf2)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        let norm: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|e| e.name() == norm)
            .ok_or_else(|| DataError::Invalid(format!("unknown experiment {s:?} (expected f2f2, l7l7, l7f2 or jointf2)")))
    }
}

/// Index of a crop within its mission's crop list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CropRef {
    pub mission: Mission,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub experiment: Experiment,
    pub test_fold: Option<usize>,
    pub val_fold: Option<usize>,
    pub train: Vec<CropRef>,
    pub val: Vec<CropRef>,
    pub test: Vec<CropRef>,
}

impl SplitSet {
    /// Fraction of training crops that come from F2.
    pub fn f2_train_share(&self) -> f64 {
        if self.train.is_empty() {
            return 0.0;
        }
        self.train.iter().filter(|c| c.mission == Mission::F2).count() as f64 / self.train.len() as f64
    }
}

fn scene_hash(id: &str) -> [u8; 32] {
    Sha256::digest(id.as_bytes()).into()
}

/// 80/10/10 scene split ordered by SHA-256 of the scene id; val and test
/// each get at least one scene. Returns (train, val, test) scene sets.
pub fn l7_scene_split<'a>(scene_ids: impl IntoIterator<Item = &'a str>) -> Result<[BTreeSet<String>; 3], DataError> {
    let unique: BTreeSet<&str> = scene_ids.into_iter().collect();
    let n = unique.len();
    if n < 3 {
        return Err(DataError::TooFewScenes { n, k: 3 });
    }
    let mut order: Vec<&str> = unique.into_iter().collect();
    order.sort_by_key(|s| (scene_hash(s), s.to_string()));
    let n_val = ((n as f64 * 0.1).round() as usize).max(1);
    let n_test = ((n as f64 * 0.1).round() as usize).max(1);
    let n_train = n - n_val - n_test;
    let take = |r: std::ops::Range<usize>| order[r].iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    Ok([take(0..n_train), take(n_train..n_train + n_val), take(n_train + n_val..n)])
}

fn refs(mission: Mission, scenes: &[String], keep: impl Fn(&str) -> bool) -> Vec<CropRef> {
    scenes.iter().enumerate().filter(|(_, s)| keep(s)).map(|(index, _)| CropRef { mission, index }).collect()
}

/// Train/val/test crop lists for one experiment instance. `l7_crops` and
/// `f2_crops` give the scene id of every crop of each mission.
pub fn build_experiment_splits(
    experiment: Experiment,
    fold_plan: Option<&FoldPlan>,
    l7_crops: Option<&[String]>,
    f2_crops: Option<&[String]>,
    test_fold: Option<usize>,
) -> Result<SplitSet, DataError> {
    let name = experiment.name();
    let l7 = || l7_crops.ok_or(DataError::MissingManifest(name, "l7"));
    let f2 = || f2_crops.ok_or(DataError::MissingManifest(name, "f2"));
    if experiment.uses_folds() {
        let plan = fold_plan.ok_or_else(|| DataError::Invalid(format!("experiment {name} needs a fold plan")))?;
        let test = test_fold.ok_or_else(|| DataError::Invalid(format!("experiment {name} needs a test fold")))?;
        if test >= plan.k {
            return Err(DataError::BadFold { fold: test, k: plan.k });
        }
        let val = (test + 1) % plan.k;
        let f2s = f2()?;
        if let Some(s) = f2s.iter().find(|s| plan.fold_of(s).is_none()) {
            return Err(DataError::Invalid(format!("scene {s} is not in the fold plan")));
        }
        let fold = |s: &str| plan.fold_of(s).expect("checked");
        let mut train = Vec::new();
        if experiment == Experiment::Jointf2 {
            let [l7_train, _, _] = l7_scene_split(l7()?.iter().map(String::as_str))?;
            train.extend(refs(Mission::L7, l7()?, |s| l7_train.contains(s)));
        }
        train.extend(refs(Mission::F2, f2s, |s| fold(s) != test && fold(s) != val));
        Ok(SplitSet {
            experiment,
            test_fold: Some(test),
            val_fold: Some(val),
            train,
            val: refs(Mission::F2, f2s, |s| fold(s) == val),
            test: refs(Mission::F2, f2s, |s| fold(s) == test),
        })
    } else {
        if let Some(f) = test_fold {
            return Err(DataError::Invalid(format!("experiment {name} has no folds, got test fold {f}")));
        }
        let l7s = l7()?;
        let [tr, va, te] = l7_scene_split(l7s.iter().map(String::as_str))?;
        let test = match experiment {
            Experiment::L7l7 => refs(Mission::L7, l7s, |s| te.contains(s)),
            _ => refs(Mission::F2, f2()?, |_| true),
        };
        Ok(SplitSet {
            experiment,
            test_fold: None,
            val_fold: None,
            train: refs(Mission::L7, l7s, |s| tr.contains(s)),
            val: refs(Mission::L7, l7s, |s| va.contains(s)),
            test,
        })
    }
}
