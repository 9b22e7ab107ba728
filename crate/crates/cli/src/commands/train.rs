use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tseg_core::datapipe::{build_experiment_splits, CropSample, Experiment, FoldPlan};
use tseg_core::eval::{aggregate_folds, write_curve_csv, CurveSeries, MetricsReport};
use tseg_core::model::{load_checkpoint, save_checkpoint};
use tseg_core::trainer::{evaluate_checkpoint, run_experiment, CvData, RunOutcome, TrainConfig};

use super::data::{read_fold_plan, scene_plan};
use super::{load_manifest, provenance, read_json, sha256_file, write_json};
use crate::args::{EvalArgs, TrainArgs};
use crate::exit::UsageError;

/// What `eval --run` needs to rebuild a run's test split.
#[derive(Debug, Serialize, Deserialize)]
struct RunRecord {
    experiment: Experiment,
    fold: Option<usize>,
    seed: u64,
    l7: Option<PathBuf>,
    f2: Option<PathBuf>,
    fold_plan: Option<FoldPlan>,
    batch_size: usize,
    curve_points: usize,
}

fn run_dir_name(experiment: Experiment, fold: Option<usize>, seed: u64) -> String {
    match fold {
        Some(k) => format!("{experiment}-fold{k}-seed{seed}"),
        None => format!("{experiment}-seed{seed}"),
    }
}

fn needs_l7(e: Experiment) -> bool {
    !matches!(e, Experiment::F2f2)
}

fn needs_f2(e: Experiment) -> bool {
    !matches!(e, Experiment::L7l7)
}

/// Metrics JSON plus PR/ROC CSVs in `dir`. The JSON carries the provenance
/// given (for a run, the checkpoint's own), so a replay writes identical bytes.
fn write_metrics(
    dir: &Path,
    metrics: &MetricsReport,
    curves: Option<&(CurveSeries, CurveSeries)>,
    curve_points: usize,
    provenance: &Option<Value>,
) -> Result<()> {
    let mut metrics = metrics.clone();
    if let Some((pr, roc)) = curves {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_curve_csv(&dir.join("pr.csv"), pr, curve_points)?;
        write_curve_csv(&dir.join("roc.csv"), roc, curve_points)?;
        metrics.thresholds_ref = Some("pr.csv".into());
    }
    write_json(&dir.join("metrics.json"), &json!({ "metrics": metrics, "provenance": provenance }))
}

fn load_optional(path: &Option<PathBuf>, what: &str, needed: bool, experiment: Experiment) -> Result<Option<(Vec<CropSample>, String)>> {
    match (path, needed) {
        (Some(p), true) => {
            let (_, crops) = load_manifest(p)?;
            Ok(Some((crops, sha256_file(p)?)))
        }
        (None, true) => bail!(UsageError(format!("experiment {experiment} needs --{what} <manifest>"))),
        _ => Ok(None),
    }
}

fn write_run(a: &TrainArgs, fold: Option<usize>, run: &RunOutcome, plan: Option<&FoldPlan>, base_prov: &Value) -> Result<PathBuf> {
    let name = run_dir_name(a.experiment, fold, a.seed);
    let dir = a.runs.join(&name);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut prov = base_prov.clone();
    prov["run"] = json!({ "name": name, "experiment": a.experiment, "fold": fold });
    let ck = &run.train.checkpoint;
    save_checkpoint(&dir.join("checkpoint.tseg"), &ck.model, &ck.norm_stats, ck.threshold, Some(prov.clone()))?;
    let mut report = run.train.report.clone();
    report.checkpoint_ref = Some("checkpoint.tseg".into());
    write_json(&dir.join("train_report.json"), &json!({ "report": report, "split": run.split, "provenance": prov }))?;
    write_json(&dir.join("timing.json"), &run.train.timing)?;
    write_metrics(&dir, &run.test, run.curves.as_ref(), a.curve_points, &Some(prov.clone()))?;
    let record = RunRecord {
        experiment: a.experiment,
        fold,
        seed: a.seed,
        l7: a.l7.clone().filter(|_| needs_l7(a.experiment)),
        f2: a.f2.clone().filter(|_| needs_f2(a.experiment)),
        fold_plan: plan.cloned(),
        batch_size: a.batch_size,
        curve_points: a.curve_points,
    };
    write_json(&dir.join("run.json"), &record)?;
    Ok(dir)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let exp = a.experiment;
    if !exp.uses_folds() && (a.fold.is_some() || a.all_folds) {
        bail!(UsageError(format!("experiment {exp} has no folds; --fold and --all-folds do not apply")));
    }
    if exp.uses_folds() && a.fold.is_none() && !a.all_folds {
        bail!(UsageError(format!("experiment {exp} needs --fold <k> or --all-folds")));
    }
    let config = TrainConfig {
        lr: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: a.seed,
        freeze_encoder: a.freeze_encoder,
        threshold: a.threshold,
        ..TrainConfig::default()
    };
    config.validate()?;
    let l7 = load_optional(&a.l7, "l7", needs_l7(exp), exp)?;
    let f2 = load_optional(&a.f2, "f2", needs_f2(exp), exp)?;
    let plan = match (exp.uses_folds(), &a.folds, &f2) {
        (true, Some(p), _) => Some(read_fold_plan(p)?),
        (true, None, Some((crops, _))) => Some(scene_plan(crops, a.k)?),
        _ => None,
    };
    let folds: Vec<Option<usize>> = match (&plan, a.fold) {
        (Some(p), Some(k)) if k >= p.k => bail!(UsageError(format!("--fold {k} out of range for {} folds", p.k))),
        (Some(_), Some(k)) => vec![Some(k)],
        (Some(p), None) => (0..p.k).map(Some).collect(),
        (None, _) => vec![None],
    };
    let mut inputs: Vec<(&Path, String)> = Vec::new();
    if let (Some(p), Some((_, h))) = (&a.l7, &l7) {
        inputs.push((p.as_path(), h.clone()));
    }
    if let (Some(p), Some((_, h))) = (&a.f2, &f2) {
        inputs.push((p.as_path(), h.clone()));
    }
    let fold_hash = a.folds.as_ref().filter(|_| exp.uses_folds()).map(|p| sha256_file(p)).transpose()?;
    if let (Some(p), Some(h)) = (&a.folds, &fold_hash) {
        inputs.push((p.as_path(), h.clone()));
    }
    let base_prov = provenance("train", a, &inputs);
    let data = CvData {
        l7: l7.as_ref().map(|(c, _)| c.as_slice()),
        f2: f2.as_ref().map(|(c, _)| c.as_slice()),
        fold_plan: plan.as_ref(),
    };
    let spec = a.spec.spec();
    let mut reports = Vec::new();
    for fold in folds {
        let run = run_experiment(exp, &data, fold, &spec, &config)?;
        let dir = write_run(a, fold, &run, plan.as_ref(), &base_prov)?;
        eprintln!(
            "{}: test macro F1 {:.4}, accuracy {:.4} (best epoch {} of {}) -> {}",
            run_dir_name(exp, fold, a.seed),
            run.test.macro_f1,
            run.test.accuracy,
            run.train.report.best_epoch + 1,
            run.train.report.epochs.len(),
            dir.display()
        );
        reports.push(run.test);
    }
    if a.all_folds {
        let agg = aggregate_folds(&reports)?;
        let path = a.runs.join(format!("{exp}-seed{}-aggregate.json", a.seed));
        write_json(&path, &json!({ "aggregate": agg, "provenance": base_prov }))?;
        eprintln!(
            "{exp} over {} folds: macro F1 {:.4} ± {:.4}, accuracy {:.4} ± {:.4} -> {}",
            agg.n_folds,
            agg.macro_f1.mean,
            agg.macro_f1.std,
            agg.accuracy.mean,
            agg.accuracy.std,
            path.display()
        );
    }
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    if let Some(run) = &a.run {
        let record: RunRecord = read_json(&run.join("run.json"))?;
        let ck_path = run.join("checkpoint.tseg");
        let ck = load_checkpoint(&ck_path).with_context(|| format!("loading checkpoint {}", ck_path.display()))?;
        let l7 = record.l7.as_ref().map(|p| load_manifest(p)).transpose()?.map(|(_, c)| c);
        let f2 = record.f2.as_ref().map(|p| load_manifest(p)).transpose()?.map(|(_, c)| c);
        let ids = |c: &Option<Vec<CropSample>>| c.as_ref().map(|c| c.iter().map(|s| s.scene_id.clone()).collect::<Vec<_>>());
        let (l7_ids, f2_ids) = (ids(&l7), ids(&f2));
        let split = build_experiment_splits(record.experiment, record.fold_plan.as_ref(), l7_ids.as_deref(), f2_ids.as_deref(), record.fold)?;
        let data = CvData { l7: l7.as_deref(), f2: f2.as_deref(), fold_plan: record.fold_plan.as_ref() };
        let test = data.resolve(&split.test);
        let (metrics, curves) = evaluate_checkpoint(&ck, &test, record.experiment.name(), record.fold, record.batch_size)?;
        let out = a.out.clone().unwrap_or_else(|| run.join("eval"));
        write_metrics(&out, &metrics, curves.as_ref(), record.curve_points, &ck.provenance)?;
        eprintln!("macro F1 {:.4}, accuracy {:.4} on {} test crops -> {}", metrics.macro_f1, metrics.accuracy, test.len(), out.display());
        return Ok(());
    }
    let (Some(ck_path), Some(manifest)) = (&a.checkpoint, &a.manifest) else {
        bail!(UsageError("eval needs --run <dir> or --checkpoint <file> --manifest <file>".into()));
    };
    let ck = load_checkpoint(ck_path).with_context(|| format!("loading checkpoint {}", ck_path.display()))?;
    let (m, crops) = load_manifest(manifest)?;
    let refs: Vec<&CropSample> = crops.iter().collect();
    let (metrics, curves) = evaluate_checkpoint(&ck, &refs, "manifest", None, a.batch_size)?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("eval"));
    let prov = provenance("eval", a, &[(ck_path.as_path(), sha256_file(ck_path)?), (manifest.as_path(), m.footer.content_hash.clone())]);
    write_metrics(&out, &metrics, curves.as_ref(), a.curve_points, &Some(prov))?;
    eprintln!("macro F1 {:.4}, accuracy {:.4} on {} crops -> {}", metrics.macro_f1, metrics.accuracy, crops.len(), out.display());
    Ok(())
}
