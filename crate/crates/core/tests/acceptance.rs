//! Acceptance suite. Runs every criterion in order and prints one
//! PASS/FAIL line each; exits nonzero if any criterion fails.
//!
//! `TSEG_ACCEPTANCE=1,4,9` restricts the run to the listed criteria.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::gradcheck::{all_kernel_checks, REL_TOL};
use tseg_core::datapipe::synth::{generate_scene, MissionConfig};
use tseg_core::datapipe::{
    assign_spatial_folds, build_experiment_splits, prepare_scene, BandRaster, CropSample, Experiment, FoldPlan, LabelGrid,
};
use tseg_core::eval::{accuracy, confusion, evaluate_pixels, macro_f1, pr_curve_ap, roc_curve_auc, Dispersion, EvalError};
use tseg_core::model::{receptive_field_radius, Checkpoint, Model, ModelSpec};
use tseg_core::tiled::{
    benchmark, compare_full_vs_tiled, infer_tiled, plan_tiles, TileLayout, CORE_SIZE, DEFAULT_BUDGET_BYTES, TILE_SIZE,
};
use tseg_core::trainer::{evaluate_checkpoint, run_experiment, train, CvData, RunOutcome, TrainConfig, TrainOutcome};

const SCENE_W: usize = 2691;
const SCENE_H: usize = 1762;
const GRID_TILES: usize = 77;

const TRANSFER_L7_SCENES: usize = 200;
const TRANSFER_F2_SCENES: usize = 12;
const TRANSFER_SEEDS: [u64; 3] = [0, 1, 2];
const TRANSFER_EPOCHS: usize = 3;

/// Results shared between criteria.
#[derive(Default)]
struct Shared {
    f2_crops: Option<Vec<CropSample>>,
    scene: Option<(BandRaster, LabelGrid)>,
    default_ck: Option<Checkpoint>,
    /// (initial encoder digest, trained outcome) of every frozen run so far.
    frozen_runs: Vec<(String, String, TrainOutcome)>,
}

impl Shared {
    fn f2_crops(&mut self) -> &[CropSample] {
        self.f2_crops.get_or_insert_with(|| mission_crops(&MissionConfig::f2(), 12, TRANSFER_F2_SCENES))
    }

    fn scene(&mut self) -> &(BandRaster, LabelGrid) {
        self.scene.get_or_insert_with(|| generate_scene(&MissionConfig::f2(), 99, 0, SCENE_W, SCENE_H).unwrap())
    }

    /// Default architecture briefly trained on the F2 crops.
    fn default_checkpoint(&mut self) -> Checkpoint {
        if self.default_ck.is_none() {
            let spec = ModelSpec::default();
            let model = Model::build(&spec, 7).unwrap();
            let initial = model.encoder_digest();
            let crops: Vec<&CropSample> = self.f2_crops().iter().collect();
            let (train_set, val_set) = crops.split_at(crops.len() * 3 / 4);
            let cfg = TrainConfig { max_epochs: 3, seed: 7, ..Default::default() };
            let out = train(model, train_set, val_set, &cfg, &[]).unwrap();
            self.default_ck = Some(out.checkpoint.clone());
            self.frozen_runs.push(("default spec".into(), initial, out));
        }
        self.default_ck.clone().unwrap()
    }
}

fn mission_crops(mission: &MissionConfig, seed: u64, n: usize) -> Vec<CropSample> {
    let mut out = Vec::new();
    for i in 0..n {
        let (r, l) = generate_scene(mission, seed, i, mission.width, mission.height).unwrap();
        out.extend(prepare_scene(&r, &l, 200.0).unwrap().crops);
    }
    out
}

fn scene_plan(crops: &[CropSample], k: usize) -> FoldPlan {
    let mut scenes: Vec<(String, (f64, f64))> = crops.iter().map(|c| (c.scene_id.clone(), c.centroid)).collect();
    scenes.dedup();
    assign_spatial_folds(&scenes, k).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1(_: &mut Shared) -> Result<String, String> {
    let t = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut names = BTreeSet::new();
    for seed in 0..5 {
        for c in all_kernel_checks(seed) {
            if c.max_rel_err > worst.0 {
                worst = (c.max_rel_err, c.name.clone());
            }
            names.insert(c.name.clone());
            ensure(c.max_rel_err <= REL_TOL, || format!("seed {seed}: {} rel err {:.2e}", c.name, c.max_rel_err))?;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    let worst = if worst.1.is_empty() {
        "every deviation under the absolute floor".to_string()
    } else {
        format!("worst rel err {:.1e} ({})", worst.0, worst.1)
    };
    Ok(format!("{} kernel checks x 5 instances, {worst}, {secs:.1} s", names.len()))
}

struct Brute {
    tp: u64,
    fp: u64,
    tn: u64,
    fn_: u64,
    ap: Option<f64>,
    auc: Option<f64>,
}

/// Double-loop counting, an exhaustive threshold sweep and O(n^2) Mann-Whitney.
fn brute(scores: &[f32], truth: &[bool], ignore: &[bool], threshold: f32) -> Brute {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for i in 0..scores.len() {
        if ignore[i] {
            continue;
        }
        match (scores[i] >= threshold, truth[i]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let pos: Vec<f32> = (0..scores.len()).filter(|&i| !ignore[i] && truth[i]).map(|i| scores[i]).collect();
    let neg: Vec<f32> = (0..scores.len()).filter(|&i| !ignore[i] && !truth[i]).map(|i| scores[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Brute { tp, fp, tn, fn_, ap: None, auc: None };
    }
    let mut thresholds: Vec<f32> = pos.iter().chain(&neg).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut prev_r) = (0.0, 0.0);
    for t in thresholds {
        let hit_p = pos.iter().filter(|&&s| s >= t).count() as f64;
        let hit_n = neg.iter().filter(|&&s| s >= t).count() as f64;
        let r = hit_p / pos.len() as f64;
        ap += (r - prev_r) * hit_p / (hit_p + hit_n);
        prev_r = r;
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Brute { tp, fp, tn, fn_, ap: Some(ap), auc: Some(wins / (pos.len() * neg.len()) as f64) }
}

fn brute_macro_f1(b: &Brute) -> f64 {
    let f1 = |tp: u64, fp: u64, fn_: u64| {
        if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    (f1(b.tp, b.fp, b.fn_) + f1(b.tn, b.fn_, b.fp)) / 2.0
}

fn criterion_2(_: &mut Shared) -> Result<String, String> {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut degenerate = 0;
    for case in 0..100 {
        let n = rng.random_range(1..=200);
        // coarse scores on some cases force ties
        let levels = if case % 3 == 0 { 5 } else { 1_000_000 };
        let scores: Vec<f32> = (0..n).map(|_| rng.random_range(0..=levels) as f32 / levels as f32).collect();
        let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.35)).collect();
        let ignore: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let threshold = rng.random_range(0.2f32..0.8);
        let b = brute(&scores, &truth, &ignore, threshold);
        let pred: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
        let valid = b.tp + b.fp + b.tn + b.fn_;
        match confusion(&pred, &truth, &ignore) {
            Ok(cm) => {
                ensure((cm.tp, cm.fp, cm.tn, cm.fn_) == (b.tp, b.fp, b.tn, b.fn_), || format!("case {case}: confusion {cm:?}"))?;
                let d_f1 = (macro_f1(&cm).unwrap() - brute_macro_f1(&b)).abs();
                let d_acc = (accuracy(&cm).unwrap() - (b.tp + b.tn) as f64 / valid as f64).abs();
                worst = worst.max(d_f1).max(d_acc);
            }
            Err(e) => ensure(valid == 0, || format!("case {case}: unexpected {e}"))?,
        }
        match (pr_curve_ap(&scores, &truth, &ignore), roc_curve_auc(&scores, &truth, &ignore), b.ap, b.auc) {
            (Ok(pr), Ok(roc), Some(ap), Some(auc)) => {
                worst = worst.max((pr.summary - ap).abs()).max((roc.summary - auc).abs());
            }
            (Err(EvalError::DegenerateLabels), Err(EvalError::DegenerateLabels), None, None) => degenerate += 1,
            _ => return Err(format!("case {case}: curve availability disagrees with the oracle")),
        }
        ensure(worst <= TOL, || format!("case {case}: deviation {worst:.2e}"))?;
    }
    let labels: Vec<u8> = (0..300).map(|i| u8::from(i % 3 == 0)).collect();
    let (r, _) = evaluate_pixels("imbalance", None, &vec![0.0; 300], &labels, 0.5).unwrap();
    ensure((r.accuracy - 2.0 / 3.0).abs() < 1e-12 && (r.macro_f1 - 0.4).abs() < 1e-12, || {
        format!("imbalance demo: accuracy {} macro F1 {}", r.accuracy, r.macro_f1)
    })?;
    Ok(format!(
        "100 cases ({degenerate} one-class), max deviation {worst:.1e}; all-clear demo accuracy {:.3} macro F1 {:.3}",
        r.accuracy, r.macro_f1
    ))
}

fn criterion_3(_: &mut Shared) -> Result<String, String> {
    let scenes = (1usize..=80, 1usize..=10).prop_flat_map(|(n, k)| {
        (proptest::collection::vec((-80.0f64..80.0, -180.0f64..180.0, 0usize..4), n), Just(k))
    });
    let mut runner = TestRunner::new(PropConfig { cases: 1000, failure_persistence: None, ..PropConfig::default() });
    runner
        .run(&scenes, |(coords, k)| {
            // each scene contributes several crops, as real manifests do
            let ids: Vec<(String, (f64, f64))> =
                coords.iter().enumerate().map(|(i, &(lat, lon, _))| (format!("s{i:03}"), (lat, lon))).collect();
            let crops: Vec<(String, usize)> =
                coords.iter().enumerate().flat_map(|(i, c)| (0..=c.2).map(move |j| (format!("s{i:03}"), j))).collect();
            match assign_spatial_folds(&ids, k) {
                Err(_) => prop_assert!(ids.len() < k),
                Ok(plan) => {
                    prop_assert!(ids.len() >= k);
                    for (scene, _) in &crops {
                        let f = plan.fold_of(scene);
                        prop_assert!(f.is_some_and(|f| f < k));
                    }
                    let sizes = plan.fold_sizes();
                    prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                    prop_assert_eq!(sizes.iter().sum::<usize>(), ids.len());
                    let mut shuffled = ids.clone();
                    shuffled.reverse();
                    prop_assert_eq!(&assign_spatial_folds(&shuffled, k).unwrap(), &plan);
                    prop_assert_eq!(&assign_spatial_folds(&ids, k).unwrap(), &plan);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let ids: Vec<(String, (f64, f64))> = (0..24).map(|i| (format!("f2-{i:03}"), (-40.0 + 3.1 * i as f64, 10.0 * i as f64))).collect();
    let sizes = assign_spatial_folds(&ids, 6).unwrap().fold_sizes();
    ensure(sizes == vec![4; 6], || format!("24 scenes, k=6: sizes {sizes:?}"))?;
    Ok("1000 random scene sets: no straddling, sizes within 1, deterministic; 24 scenes -> 6 x 4".into())
}

fn exact_cover(layout: &TileLayout) -> Result<(), String> {
    let (w, h) = (layout.width, layout.height);
    let mut hits = vec![0u8; w * h];
    let mut area = 0;
    for c in &layout.cores {
        area += c.height * c.width;
        for r in c.row..c.row + c.height {
            for v in &mut hits[r * w + c.col..r * w + c.col + c.width] {
                *v += 1;
            }
        }
    }
    ensure(area == w * h, || format!("{w}x{h}: core area {area}"))?;
    ensure(hits.iter().all(|&v| v == 1), || format!("{w}x{h}: cores overlap or leave gaps"))
}

fn criterion_4(_: &mut Shared) -> Result<String, String> {
    let mut runner = TestRunner::new(PropConfig { cases: 500, failure_persistence: None, ..PropConfig::default() });
    runner
        .run(&(1usize..=3000, 1usize..=3000), |(w, h)| {
            let layout = plan_tiles(w, h, TILE_SIZE, CORE_SIZE).map_err(|e| TestCaseError::fail(e.to_string()))?;
            exact_cover(&layout).map_err(TestCaseError::fail)?;
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let layout = plan_tiles(SCENE_W, SCENE_H, TILE_SIZE, CORE_SIZE).unwrap();
    exact_cover(&layout)?;
    ensure(layout.n_tiles() == GRID_TILES, || format!("{SCENE_W}x{SCENE_H}: {} tiles", layout.n_tiles()))?;
    Ok(format!("500 random dims partitioned exactly; {SCENE_W}x{SCENE_H} -> {} tiles", layout.n_tiles()))
}

fn criterion_5(shared: &mut Shared) -> Result<String, String> {
    let spec = ModelSpec::default();
    let radius = receptive_field_radius(&spec);
    let layout = plan_tiles(SCENE_W, SCENE_H, TILE_SIZE, CORE_SIZE).unwrap();
    ensure(radius <= layout.halo, || format!("receptive-field radius {radius} exceeds halo {}", layout.halo))?;
    let ck = shared.default_checkpoint();
    let (raster, truth) = shared.scene().clone();
    let t = Instant::now();
    let r = compare_full_vs_tiled(&ck, &raster, Some(&truth), DEFAULT_BUDGET_BYTES).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let delta = r.metric_delta.ok_or("no metric delta")?;
    ensure(r.interior_max_abs_prob_diff <= 1e-4, || format!("interior diff {:.2e}", r.interior_max_abs_prob_diff))?;
    ensure(delta.macro_f1_delta_pp.abs() <= 1.0, || format!("macro F1 delta {:.3} pp", delta.macro_f1_delta_pp))?;
    ensure(secs < 300.0, || format!("took {secs:.0} s"))?;
    Ok(format!(
        "radius {radius} <= halo {}, interior max diff {:.1e}, macro F1 {:.4} tiled vs {:.4} full (delta {:.3} pp), accuracy delta {:.3} pp, {secs:.0} s",
        layout.halo,
        r.interior_max_abs_prob_diff,
        delta.tiled_macro_f1,
        delta.full_macro_f1,
        delta.macro_f1_delta_pp,
        delta.accuracy_delta_pp
    ))
}

fn criterion_6(shared: &mut Shared) -> Result<String, String> {
    let t = Instant::now();
    let l7 = mission_crops(&MissionConfig::l7(), 11, TRANSFER_L7_SCENES);
    let f2 = shared.f2_crops().to_vec();
    let plan = scene_plan(&f2, 6);
    let data = CvData { l7: Some(&l7), f2: Some(&f2), fold_plan: Some(&plan) };
    let spec = ModelSpec::compact();
    let l7_ids: Vec<String> = l7.iter().map(|c| c.scene_id.clone()).collect();
    let l7_test = build_experiment_splits(Experiment::L7l7, None, Some(&l7_ids), None, None).unwrap();
    let l7_test = data.resolve(&l7_test.test);
    let mut scores: [Vec<f64>; 4] = Default::default();
    for &seed in &TRANSFER_SEEDS {
        let cfg = TrainConfig { max_epochs: TRANSFER_EPOCHS, seed, ..Default::default() };
        let initial = Model::build(&spec, seed).unwrap().encoder_digest();
        let mut record = |name: String, run: &RunOutcome| shared.frozen_runs.push((name, initial.clone(), run.train.clone()));
        // l7l7 and l7f2 share one L7-trained model; only the test set differs
        let l7_run = run_experiment(Experiment::L7f2, &data, None, &spec, &cfg).map_err(|e| e.to_string())?;
        let (l7l7, _) = evaluate_checkpoint(&l7_run.train.checkpoint, &l7_test, "l7l7", None, cfg.batch_size).unwrap();
        record(format!("l7 seed {seed}"), &l7_run);
        let mut f2f2 = Vec::new();
        let mut joint = Vec::new();
        for fold in 0..plan.k {
            let a = run_experiment(Experiment::F2f2, &data, Some(fold), &spec, &cfg).map_err(|e| e.to_string())?;
            let b = run_experiment(Experiment::Jointf2, &data, Some(fold), &spec, &cfg).map_err(|e| e.to_string())?;
            f2f2.push(a.test.macro_f1);
            joint.push(b.test.macro_f1);
            record(format!("f2f2 fold {fold} seed {seed}"), &a);
            record(format!("jointf2 fold {fold} seed {seed}"), &b);
        }
        let mean = |v: &[f64]| Dispersion::of(v).unwrap().mean;
        scores[0].push(mean(&f2f2));
        scores[1].push(l7l7.macro_f1);
        scores[2].push(l7_run.test.macro_f1);
        scores[3].push(mean(&joint));
    }
    let d: Vec<Dispersion> = scores.iter().map(|s| Dispersion::of(s).unwrap()).collect();
    let [f2f2, l7l7, l7f2, joint] = [d[0], d[1], d[2], d[3]];
    let table = format!(
        "macro F1 mean+-std over {} seeds: f2f2 {:.4}+-{:.4}, l7l7 {:.4}+-{:.4}, l7f2 {:.4}+-{:.4}, jointf2 {:.4}+-{:.4}; {:.0} s",
        TRANSFER_SEEDS.len(),
        f2f2.mean,
        f2f2.std,
        l7l7.mean,
        l7l7.std,
        l7f2.mean,
        l7f2.std,
        joint.mean,
        joint.std,
        t.elapsed().as_secs_f64()
    );
    let per_seed = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/");
    let table = format!(
        "{table}; per seed f2f2 {} l7l7 {} l7f2 {} jointf2 {}",
        per_seed(&scores[0]),
        per_seed(&scores[1]),
        per_seed(&scores[2]),
        per_seed(&scores[3])
    );
    // the margin must exceed the larger cross-seed std of the pair
    let joint_margin = joint.mean - f2f2.mean;
    let l7_margin = l7l7.mean - l7f2.mean;
    ensure(joint_margin > joint.std.max(f2f2.std), || format!("jointf2 - f2f2 = {joint_margin:.4}; {table}"))?;
    ensure(l7_margin > l7l7.std.max(l7f2.std), || format!("l7l7 - l7f2 = {l7_margin:.4}; {table}"))?;
    Ok(table)
}

fn criterion_7(shared: &mut Shared) -> Result<String, String> {
    shared.default_checkpoint();
    let runs = &shared.frozen_runs;
    for (name, initial, out) in runs {
        ensure(out.report.config.freeze_encoder, || format!("{name}: encoder was not frozen"))?;
        ensure(&out.checkpoint.model.encoder_digest() == initial, || format!("{name}: encoder changed"))?;
        ensure(&out.report.encoder_digest == initial, || format!("{name}: report digest differs"))?;
    }
    Ok(format!("{} frozen training runs, encoder bytes unchanged in all", runs.len()))
}

fn criterion_8(shared: &mut Shared) -> Result<String, String> {
    let crops: Vec<&CropSample> = shared.f2_crops().iter().take(12).collect();
    let (train_set, val_set) = crops.split_at(8);
    let cfg = TrainConfig { max_epochs: 2, batch_size: 4, seed: 21, ..Default::default() };
    let (raster, _) = generate_scene(&MissionConfig::f2(), 5, 1, 700, 600).unwrap();
    let once = || {
        let out = train(Model::build(&ModelSpec::compact(), 21).unwrap(), train_set, val_set, &cfg, &[]).unwrap();
        let (metrics, _) = evaluate_checkpoint(&out.checkpoint, val_set, "det", None, 4).unwrap();
        let layout = plan_tiles(raster.width, raster.height, TILE_SIZE, CORE_SIZE).unwrap();
        let tiled = infer_tiled(&out.checkpoint, &raster, &layout, DEFAULT_BUDGET_BYTES).unwrap();
        (
            out.checkpoint.to_bytes().unwrap(),
            serde_json::to_vec(&out.report).unwrap(),
            serde_json::to_vec(&metrics).unwrap(),
            tiled.mask,
            tiled.probs,
        )
    };
    let a = once();
    let b = once();
    ensure(a.0 == b.0, || "checkpoint bytes differ".into())?;
    ensure(a.1 == b.1, || "train report differs".into())?;
    ensure(a.2 == b.2, || "metrics report differs".into())?;
    ensure(a.3 == b.3, || "masks differ".into())?;
    let same_probs = a.4.iter().zip(&b.4).all(|(x, y)| x.to_bits() == y.to_bits());
    ensure(same_probs, || "probabilities differ".into())?;
    Ok(format!("checkpoint ({} bytes), train report, metrics, mask and probabilities bit-identical across two runs", a.0.len()))
}

fn criterion_9(shared: &mut Shared) -> Result<String, String> {
    const TARGET_S: f64 = 5.0;
    let ck = shared.default_checkpoint();
    let (raster, _) = shared.scene().clone();
    let layout = plan_tiles(SCENE_W, SCENE_H, TILE_SIZE, CORE_SIZE).unwrap();
    let report = benchmark(&ck, &raster, &layout, 5, DEFAULT_BUDGET_BYTES).map_err(|e| e.to_string())?;
    ensure(report.peak_resident_estimate_bytes <= DEFAULT_BUDGET_BYTES, || {
        format!("peak estimate {} exceeds budget {}", report.peak_resident_estimate_bytes, DEFAULT_BUDGET_BYTES)
    })?;
    // correct output: stitched result matches an independent single-tile-batch run
    let reference = infer_tiled(&ck, &raster, &layout, 1).err();
    ensure(reference.is_some(), || "a 1-byte budget was accepted".into())?;
    let narrow = ck.model.activation_bytes(1, TILE_SIZE, TILE_SIZE) + 4 * TILE_SIZE * TILE_SIZE;
    let single = infer_tiled(&ck, &raster, &layout, narrow).map_err(|e| e.to_string())?;
    ensure(single.batch_tiles == 1, || format!("narrow budget ran {} tiles per batch", single.batch_tiles))?;
    let digest_single = hex::encode(<sha2::Sha256 as sha2::Digest>::digest(
        single.probs.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>(),
    ));
    ensure(digest_single == report.output_digest, || "output depends on batching".into())?;
    let m = &report.machine;
    let timing = format!(
        "median {:.2} s over {} reps ({} tiles, {} per batch, peak estimate {} MiB of {} MiB) on {} [{} threads]",
        report.median_wall_time_s,
        report.repetitions,
        report.n_tiles,
        report.batch_tiles,
        report.peak_resident_estimate_bytes >> 20,
        DEFAULT_BUDGET_BYTES >> 20,
        m.cpu,
        m.threads
    );
    if report.median_wall_time_s <= TARGET_S {
        Ok(timing)
    } else {
        Ok(format!("budget and output verified; timing target of {TARGET_S} s NOT MET on this host, reported only: {timing}"))
    }
}

type Criterion = (usize, &'static str, fn(&mut Shared) -> Result<String, String>);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "gradient suite", criterion_1),
        (2, "metric oracles", criterion_2),
        (3, "fold-plan properties", criterion_3),
        (4, "tiling exact cover", criterion_4),
        (5, "tiled vs full equivalence", criterion_5),
        (6, "transfer protocol", criterion_6),
        (7, "frozen encoder", criterion_7),
        (8, "determinism", criterion_8),
        (9, "benchmark", criterion_9),
    ];
    let only: Option<BTreeSet<usize>> =
        std::env::var("TSEG_ACCEPTANCE").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut shared = Shared::default();
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    for (n, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut shared))).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        let line = match &result {
            Ok(detail) => format!("acceptance criterion {n} ({name}): PASS [{secs:.1} s] {detail}"),
            Err(why) => format!("acceptance criterion {n} ({name}): FAIL [{secs:.1} s] {why}"),
        };
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
        if result.is_err() {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        writeln!(out, "acceptance: {} criterion(s) failed: {failed:?}", failed.len()).unwrap();
        std::process::exit(1);
    }
    writeln!(out, "acceptance: all selected criteria passed").unwrap();
}
