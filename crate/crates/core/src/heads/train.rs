use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::TensorArchive;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::eval::{compute_eer, ScoredTrial};
use crate::features::FeatureMatrix;
use crate::util::write_atomic;

use super::adam::{Adam, AdamConfig};
use super::nn::{backward_all, forward_all, Tensor4};
use super::{score_from_logits, sidecar_path, Head, HeadArch, Sidecar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation EER improvement before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: AdamConfig::default(),
            batch_size: 32,
            max_epochs: 50,
            early_stop_patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.optimizer.lr >= 0.0) || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(format!(
                "training needs lr >= 0, batch_size >= 1 and max_epochs >= 1 (got {}, {}, {})",
                self.optimizer.lr, self.batch_size, self.max_epochs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss seen during the epoch.
    pub mean_batch_loss: f64,
    /// Cross-entropy over the whole training set after the epoch, inference mode.
    pub train_loss: f64,
    /// Fraction in `[0, 1]`.
    pub val_eer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedHead {
    pub head: Head,
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    /// Training-set loss of the initialized head, inference mode.
    pub initial_train_loss: f64,
    /// Epoch (1-based) whose weights were kept.
    pub best_epoch: usize,
}

impl TrainedHead {
    pub fn score(&self, x: &FeatureMatrix) -> Result<f64> {
        self.head.score(x)
    }

    /// Writes the weights to `path` and the architecture, config and history
    /// to `<path>.json`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.head.to_archive()?.save(path)?;
        let sidecar = Sidecar {
            arch: self.head.arch.clone(),
            feature_dim: self.head.feature_dim,
            train_config: self.config,
            history: self.history.clone(),
            initial_train_loss: self.initial_train_loss,
            best_epoch: self.best_epoch,
        };
        let mut json = serde_json::to_vec_pretty(&sidecar)?;
        json.push(b'\n');
        write_atomic(&sidecar_path(path), &json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let s: Sidecar = serde_json::from_str(&text)?;
        let head = Head::from_archive(s.arch, s.feature_dim, &TensorArchive::load(path)?)?;
        Ok(Self {
            head,
            config: s.train_config,
            history: s.history,
            initial_train_loss: s.initial_train_loss,
            best_epoch: s.best_epoch,
        })
    }
}

/// Mean two-class cross-entropy and its gradient with respect to the logits.
pub(crate) fn cross_entropy(logits: &[f64], classes: &[usize]) -> (f64, Vec<f64>) {
    let n = classes.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (i, &c) in classes.iter().enumerate() {
        let l = &logits[2 * i..2 * i + 2];
        let m = l[0].max(l[1]);
        let lse = m + ((l[0] - m).exp() + (l[1] - m).exp()).ln();
        loss += lse - l[c];
        for k in 0..2 {
            let p = (l[k] - lse).exp();
            grad[2 * i + k] = (p - if k == c { 1.0 } else { 0.0 }) / n;
        }
    }
    (loss / n, grad)
}

fn check_set(name: &str, set: &[(FeatureMatrix, Label)]) -> Result<()> {
    let bona = set.iter().filter(|s| s.1 == Label::Bonafide).count();
    if bona == 0 || bona == set.len() {
        return Err(Error::Config(format!(
            "{name} set needs both classes ({bona} bonafide, {} deepfake)",
            set.len() - bona
        )));
    }
    Ok(())
}

fn dataset_loss(head: &Head, inputs: &[Vec<f64>], classes: &[usize], batch: usize) -> Result<f64> {
    let mut total = 0.0;
    for (xs, cs) in inputs.chunks(batch).zip(classes.chunks(batch)) {
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let logits: Vec<f64> = head.logits(&refs)?.into_iter().flatten().collect();
        total += cross_entropy(&logits, cs).0 * cs.len() as f64;
    }
    Ok(total / classes.len() as f64)
}

fn validation_eer(head: &Head, inputs: &[Vec<f64>], set: &[(FeatureMatrix, Label)], batch: usize) -> Result<f64> {
    let mut trials = Vec::with_capacity(set.len());
    for (xs, items) in inputs.chunks(batch).zip(set.chunks(batch)) {
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        for (logits, (x, label)) in head.logits(&refs)?.into_iter().zip(items) {
            trials.push(ScoredTrial::new(x.source_clip.clone(), *label, score_from_logits(logits))?);
        }
    }
    Ok(compute_eer(&trials)?.eer)
}

/// Trains a head with Adam on mini-batch cross-entropy, evaluating the
/// validation EER after every epoch and keeping the best epoch's weights.
/// Reproducible for a fixed seed.
pub fn train(
    arch: &HeadArch,
    train_set: &[(FeatureMatrix, Label)],
    val_set: &[(FeatureMatrix, Label)],
    cfg: &TrainConfig,
) -> Result<TrainedHead> {
    cfg.validate()?;
    check_set("training", train_set)?;
    check_set("validation", val_set)?;
    let feature_dim = train_set[0].0.cols();
    let mut head = Head::new(arch.clone(), feature_dim, cfg.seed)?;

    let resize = |set: &[(FeatureMatrix, Label)], head: &Head| -> Result<Vec<Vec<f64>>> {
        set.par_iter().map(|(x, _)| head.resize_input(x)).collect()
    };
    let mut train_x = resize(train_set, &head)?;
    let mut val_x = resize(val_set, &head)?;
    let count = (train_x.len() * train_x[0].len()) as f64;
    let mean = train_x.iter().flatten().sum::<f64>() / count;
    let var = train_x.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    head.set_input_stats(mean, if var > 1e-24 { var.sqrt() } else { 1.0 });
    train_x.iter_mut().chain(val_x.iter_mut()).for_each(|x| head.standardize(x));
    let classes: Vec<usize> = train_set.iter().map(|s| s.1.class_index()).collect();

    let initial_train_loss = dataset_loss(&head, &train_x, &classes, cfg.batch_size)?;
    let mut adam = Adam::new(cfg.optimizer, &head.store);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Head)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = 0.0;
        let mut n_batches = 0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&[f64]> = idx.iter().map(|&i| train_x[i].as_slice()).collect();
            let batch_classes: Vec<usize> = idx.iter().map(|&i| classes[i]).collect();
            head.store.zero_grad();
            let (y, caches) = forward_all(&head.layers, &head.store, head.batch(&refs)?, true)?;
            let (loss, grad) = cross_entropy(&y.data, &batch_classes);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
            backward_all(&head.layers, &mut head.store, &caches, Tensor4::new(y.n, y.c, y.h, y.w, grad)?);
            for (layer, cache) in head.layers.iter().zip(&caches) {
                layer.update_running_stats(&mut head.store, cache);
            }
            adam.step(&mut head.store);
            batch_losses += loss;
            n_batches += 1;
        }
        let record = EpochRecord {
            epoch,
            mean_batch_loss: batch_losses / n_batches as f64,
            train_loss: dataset_loss(&head, &train_x, &classes, cfg.batch_size)?,
            val_eer: validation_eer(&head, &val_x, val_set, cfg.batch_size)?,
        };
        log::info!(
            "epoch {epoch}: batch loss {:.4}, train loss {:.4}, val EER {:.2}%",
            record.mean_batch_loss,
            record.train_loss,
            100.0 * record.val_eer
        );
        history.push(record);
        if best.as_ref().map_or(true, |b| record.val_eer < b.0) {
            best = Some((record.val_eer, epoch, head.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                break;
            }
        }
    }
    let (_, best_epoch, head) = best.expect("at least one epoch runs");
    Ok(TrainedHead {
        head,
        config: *cfg,
        history,
        initial_train_loss,
        best_epoch,
    })
}
