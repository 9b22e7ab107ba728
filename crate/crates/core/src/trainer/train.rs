use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, bce_with_logits, AdamConfig, AdamState, TrainError};
use crate::datapipe::{compute_norm_stats, zscore_apply, CropSample};
use crate::eval::{accuracy, macro_f1, ConfusionMatrix};
use crate::model::{Checkpoint, Model, NormStats};
use crate::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a val macro-F1 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub freeze_encoder: bool,
    /// Probability at or above which a pixel counts as cloud.
    pub threshold: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            betas: (0.9, 0.999),
            eps: 1e-8,
            batch_size: 8,
            max_epochs: 50,
            patience: 10,
            seed: 0,
            freeze_encoder: true,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        let (b1, b2) = self.betas;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0");
        }
        if !(0.0 < b1 && b1 < 1.0 && 0.0 < b2 && b2 < 1.0) {
            return bad("betas must lie in (0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be > 0");
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return bad("patience, batch_size and max_epochs must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.betas.0, beta2: self.betas.1, eps: self.eps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_macro_f1: f64,
    pub val_accuracy: f64,
}

/// Everything about a run that is a function of its inputs; timings live in
/// [`TrainTiming`] so two identical runs produce byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub norm_stats: Vec<NormStats>,
    pub encoder_digest: String,
    pub checkpoint_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTiming {
    pub wall_time_s: f64,
    pub epoch_time_s: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
    pub timing: TrainTiming,
}

/// Per-dataset z-score statistics from the training crops, in order of
/// first appearance.
pub fn train_norm_stats(train: &[&CropSample]) -> Result<Vec<NormStats>, TrainError> {
    let mut ids: Vec<&str> = Vec::new();
    for c in train {
        if !ids.contains(&c.dataset_id.as_str()) {
            ids.push(&c.dataset_id);
        }
    }
    ids.into_iter().map(|id| Ok(compute_norm_stats(train.iter().copied(), id)?)).collect()
}

pub(crate) fn stats_for<'a>(stats: &'a [NormStats], dataset_id: &str) -> Result<&'a NormStats, TrainError> {
    stats.iter().find(|s| s.dataset_id == dataset_id).ok_or_else(|| TrainError::MissingNormStats(dataset_id.to_string()))
}

struct Prepared {
    images: Vec<Vec<f32>>,
    labels: Vec<Vec<u8>>,
    size: usize,
}

fn prepare(crops: &[&CropSample], stats: &[NormStats]) -> Result<Prepared, TrainError> {
    let size = crops.first().map_or(0, |c| c.size);
    let mut images = Vec::with_capacity(crops.len());
    let mut labels = Vec::with_capacity(crops.len());
    for c in crops {
        if c.size != size || c.image.len() != size * size || c.label.len() != size * size {
            return Err(TrainError::Shape(format!("crop {} is not {size}x{size}", c.crop_id())));
        }
        images.push(zscore_apply(&c.image, &c.nodata, stats_for(stats, &c.dataset_id)?));
        labels.push(c.label.clone());
    }
    Ok(Prepared { images, labels, size })
}

impl Prepared {
    fn batch(&self, idx: &[usize]) -> Result<(Tensor, Vec<u8>), TrainError> {
        let px = self.size * self.size;
        let mut x = Vec::with_capacity(idx.len() * px);
        let mut y = Vec::with_capacity(idx.len() * px);
        for &i in idx {
            x.extend_from_slice(&self.images[i]);
            y.extend_from_slice(&self.labels[i]);
        }
        Ok((Tensor::from_vec([idx.len(), 1, self.size, self.size], x).map_err(crate::model::ModelError::from)?, y))
    }

    fn predict(&self, model: &Model, batch_size: usize) -> Result<Vec<f32>, TrainError> {
        let mut out = Vec::with_capacity(self.images.len() * self.size * self.size);
        let all: Vec<usize> = (0..self.images.len()).collect();
        for chunk in all.chunks(batch_size) {
            let (x, _) = self.batch(chunk)?;
            out.extend_from_slice(model.forward(&x)?.data());
        }
        Ok(out)
    }

    fn all_labels(&self) -> Vec<u8> {
        self.labels.concat()
    }
}

/// Sigmoid probabilities for `crops` (concatenated in order), each crop
/// normalized with its dataset's entry in `stats`.
pub fn predict_crops(model: &Model, crops: &[&CropSample], stats: &[NormStats], batch_size: usize) -> Result<Vec<f32>, TrainError> {
    prepare(crops, stats)?.predict(model, batch_size.max(1))
}

/// Trains `model` on `train`, selecting the epoch with the best val macro F1.
/// Each dataset is z-scored with statistics from its own training crops;
/// datasets seen only in `val` must have an entry in `extra_stats`.
pub fn train(
    mut model: Model,
    train: &[&CropSample],
    val: &[&CropSample],
    config: &TrainConfig,
    extra_stats: &[NormStats],
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptySplit("val"));
    }
    let started = Instant::now();
    let mut stats = train_norm_stats(train)?;
    for s in extra_stats {
        if !stats.iter().any(|t| t.dataset_id == s.dataset_id) {
            stats.push(s.clone());
        }
    }
    let train_set = prepare(train, &stats)?;
    let val_set = prepare(val, &stats)?;
    let val_labels = val_set.all_labels();

    model.set_encoder_frozen(config.freeze_encoder);
    let encoder_digest = model.encoder_digest();
    let adam = config.adam();
    let mut opt = AdamState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut epochs = Vec::new();
    let mut epoch_time_s = Vec::new();
    let mut best: Option<(usize, f64, Model)> = None;
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        let t0 = Instant::now();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        for idx in order.chunks(config.batch_size) {
            let (x, y) = train_set.batch(idx)?;
            model.zero_grad();
            let (logits, tape) = model.forward_train(&x)?;
            let (loss, grad) = match bce_with_logits(&logits, &y) {
                Err(TrainError::AllIgnored) => continue,
                r => r?,
            };
            model.backward(tape, &grad)?;
            adam_step(&mut model.params_mut(), &mut opt, &adam);
            loss_sum += loss * idx.len() as f64;
            loss_n += idx.len();
        }
        let probs = val_set.predict(&model, config.batch_size)?;
        let mut cm = ConfusionMatrix::default();
        cm.accumulate_labels(&probs, &val_labels, config.threshold)?;
        let rec = EpochRecord {
            epoch,
            train_loss: if loss_n == 0 { f64::NAN } else { loss_sum / loss_n as f64 },
            val_macro_f1: macro_f1(&cm)?,
            val_accuracy: accuracy(&cm)?,
        };
        epoch_time_s.push(t0.elapsed().as_secs_f64());
        if best.as_ref().is_none_or(|b| rec.val_macro_f1 > b.1) {
            best = Some((epoch, rec.val_macro_f1, model.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        epochs.push(rec);
        if stale >= config.patience {
            break;
        }
    }
    let (best_epoch, best_f1, best_model) = best.expect("max_epochs >= 1");
    let report = TrainReport {
        config: config.clone(),
        epochs,
        best_epoch,
        best_val_macro_f1: best_f1,
        n_train: train.len(),
        n_val: val.len(),
        norm_stats: stats.clone(),
        encoder_digest,
        checkpoint_digest: best_model.state_digest(),
        checkpoint_ref: None,
    };
    let checkpoint = Checkpoint { model: best_model, norm_stats: stats, threshold: config.threshold, provenance: None };
    let timing = TrainTiming { wall_time_s: started.elapsed().as_secs_f64(), epoch_time_s };
    Ok(TrainOutcome { checkpoint, report, timing })
}
