use super::train::{stats_for, train_norm_stats};
use super::{predict_crops, train, TrainConfig, TrainError, TrainOutcome};
use crate::datapipe::{build_experiment_splits, CropRef, CropSample, Experiment, FoldPlan, Mission, SplitSet};
use crate::eval::{aggregate_folds, evaluate_pixels, AggregateReport, CurveSeries, MetricsReport};
use crate::model::{Checkpoint, Model, ModelSpec, NormStats};

/// Crops of both missions plus the F2 fold plan; any part may be absent
/// when the experiment does not need it.
#[derive(Debug, Clone, Copy, Default)]
pub struct CvData<'a> {
    pub l7: Option<&'a [CropSample]>,
    pub f2: Option<&'a [CropSample]>,
    pub fold_plan: Option<&'a FoldPlan>,
}

impl<'a> CvData<'a> {
    /// Crops behind split references.
    pub fn resolve(&self, refs: &[CropRef]) -> Vec<&'a CropSample> {
        refs.iter()
            .map(|r| match r.mission {
                Mission::L7 => &self.l7.expect("split built from l7 crops")[r.index],
                Mission::F2 => &self.f2.expect("split built from f2 crops")[r.index],
            })
            .collect()
    }

    fn scene_ids(crops: Option<&[CropSample]>) -> Option<Vec<String>> {
        crops.map(|c| c.iter().map(|s| s.scene_id.clone()).collect())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub split: SplitSet,
    pub train: TrainOutcome,
    pub test: MetricsReport,
    pub curves: Option<(CurveSeries, CurveSeries)>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub runs: Vec<RunOutcome>,
    pub aggregate: AggregateReport,
}

/// Stats for datasets that appear in `eval` but not in training: a model
/// never trained on a mission sees it through the first training dataset's
/// normalization.
fn zero_shot_stats(train_stats: &[NormStats], eval: &[&CropSample]) -> Vec<NormStats> {
    let mut out: Vec<NormStats> = Vec::new();
    for c in eval {
        let known = train_stats.iter().chain(&out).any(|s| s.dataset_id == c.dataset_id);
        if !known {
            if let Some(first) = train_stats.first() {
                out.push(NormStats { dataset_id: c.dataset_id.clone(), ..first.clone() });
            }
        }
    }
    out
}

/// Pixel-pooled test metrics of a checkpoint on `crops`.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    crops: &[&CropSample],
    experiment: &str,
    fold: Option<usize>,
    batch_size: usize,
) -> Result<(MetricsReport, Option<(CurveSeries, CurveSeries)>), TrainError> {
    if crops.is_empty() {
        return Err(TrainError::EmptySplit("test"));
    }
    for c in crops {
        stats_for(&checkpoint.norm_stats, &c.dataset_id)?;
    }
    let probs = predict_crops(&checkpoint.model, crops, &checkpoint.norm_stats, batch_size)?;
    let labels: Vec<u8> = crops.iter().flat_map(|c| c.label.iter().copied()).collect();
    Ok(evaluate_pixels(experiment, fold, &probs, &labels, checkpoint.threshold)?)
}

/// One train/evaluate instance of `experiment`; the model is built from
/// `spec` with `config.seed`.
pub fn run_experiment(
    experiment: Experiment,
    data: &CvData<'_>,
    test_fold: Option<usize>,
    spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<RunOutcome, TrainError> {
    let l7_ids = CvData::scene_ids(data.l7);
    let f2_ids = CvData::scene_ids(data.f2);
    let split = build_experiment_splits(experiment, data.fold_plan, l7_ids.as_deref(), f2_ids.as_deref(), test_fold)?;
    let train_crops = data.resolve(&split.train);
    let val_crops = data.resolve(&split.val);
    let test_crops = data.resolve(&split.test);
    if train_crops.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    let train_stats = train_norm_stats(&train_crops)?;
    let eval_crops: Vec<&CropSample> = val_crops.iter().chain(&test_crops).copied().collect();
    let extra = zero_shot_stats(&train_stats, &eval_crops);
    let model = Model::build(spec, config.seed)?;
    let outcome = train(model, &train_crops, &val_crops, config, &extra)?;
    let (test, curves) = evaluate_checkpoint(&outcome.checkpoint, &test_crops, experiment.name(), split.test_fold, config.batch_size)?;
    Ok(RunOutcome { split, train: outcome, test, curves })
}

/// All folds of an F2 experiment (one run per test fold) or the single run
/// of an L7-trained one, plus the unweighted aggregate over test folds.
pub fn run_cv(experiment: Experiment, data: &CvData<'_>, spec: &ModelSpec, config: &TrainConfig) -> Result<CvOutcome, TrainError> {
    let folds: Vec<Option<usize>> = if experiment.uses_folds() {
        let plan = data.fold_plan.ok_or_else(|| TrainError::Config(format!("experiment {experiment} needs a fold plan")))?;
        (0..plan.k).map(Some).collect()
    } else {
        vec![None]
    };
    let runs = folds.into_iter().map(|f| run_experiment(experiment, data, f, spec, config)).collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<MetricsReport> = runs.iter().map(|r| r.test.clone()).collect();
    Ok(CvOutcome { aggregate: aggregate_folds(&reports)?, runs })
}
