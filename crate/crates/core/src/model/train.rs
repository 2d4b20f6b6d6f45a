use std::path::Path;
use std::time::Instant;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::roc_auc;
use crate::model::network::{Mode, Model};
use crate::preprocess::windows::{DatasetSplit, FeatureWindow};
use crate::tensor::{clip_grad_norm, step_lr, AdamW, Graph};

/// Improvements of the validation AUC smaller than this do not count.
pub const MIN_IMPROVEMENT: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
    pub lr: f64,
    /// Excluded from equality: it is the only non-reproducible field.
    pub wall_secs: f64,
}

impl PartialEq for EpochRecord {
    fn eq(&self, o: &Self) -> bool {
        self.epoch == o.epoch
            && self.train_loss.to_bits() == o.train_loss.to_bits()
            && self.val_auc.to_bits() == o.val_auc.to_bits()
            && self.lr.to_bits() == o.lr.to_bits()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainingHistory {
    pub fn best_auc(&self) -> f64 {
        self.epochs[self.best_epoch].val_auc
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
        w.write_record(["epoch", "loss", "val_auc", "lr"]).map_err(Error::csv(path))?;
        for e in &self.epochs {
            w.write_record([e.epoch.to_string(), format!("{}", e.train_loss), format!("{}", e.val_auc), format!("{}", e.lr)])
                .map_err(Error::csv(path))?;
        }
        w.flush().map_err(Error::io(path))
    }
}

/// Inverse-frequency weights `N / (2 N_c)` for classes `[negative, positive]`.
pub fn class_weights(labels: &[bool]) -> Result<[f64; 2]> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!("training set has {pos} positives and {neg} negatives")));
    }
    let n = labels.len() as f64;
    Ok([n / (2.0 * neg as f64), n / (2.0 * pos as f64)])
}

/// Splits shuffled indices into batches, folding a trailing single row into
/// the previous batch (batch norm needs two rows).
pub fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() > 1 && out.last().map(|b| b.len()) == Some(1) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        *out.last_mut().unwrap() = &order[start..];
    }
    out
}

pub fn views(windows: &[FeatureWindow]) -> Vec<ArrayView2<'_, f64>> {
    windows.iter().map(|w| w.values.view()).collect()
}

fn auc_on(model: &Model, windows: &[FeatureWindow]) -> Result<f64> {
    let scores = model.predict_proba(&views(windows))?;
    let labels: Vec<bool> = windows.iter().map(|w| w.label).collect();
    Ok(roc_auc(&scores, &labels)?.1)
}

/// Mini-batch AdamW training with early stopping on validation AUC.
///
/// The returned model holds the parameters and batch-norm statistics of the
/// best epoch (ties go to the earliest).
pub fn train(mut model: Model, split: &DatasetSplit) -> Result<(Model, TrainingHistory)> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if split.train.len() < 2 {
        return Err(Error::Invalid("training set needs at least two windows".into()));
    }
    let train_labels: Vec<bool> = split.train.iter().map(|w| w.label).collect();
    let weights = class_weights(&train_labels)?;
    let val_labels: Vec<bool> = split.validation.iter().map(|w| w.label).collect();
    if !val_labels.iter().any(|&l| l) || val_labels.iter().all(|&l| l) {
        return Err(Error::SingleClass("validation set lacks a class".into()));
    }
    let targets: Vec<usize> = train_labels.iter().map(|&l| l as usize).collect();
    let inputs = views(&split.train);
    let opt = AdamW { weight_decay: cfg.weight_decay, ..AdamW::default() };
    // Stream 0 of the seed initialized the weights; stream 1 drives shuffling and dropout.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut history = TrainingHistory { epochs: Vec::new(), best_epoch: 0, stopped_early: false };
    let mut best: Option<(f64, Model)> = None;
    let mut since_best = 0;
    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let lr = step_lr(epoch, cfg.base_lr, cfg.lr_gamma, cfg.lr_step);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for batch in batches(&order, cfg.batch_size) {
            let xs: Vec<ArrayView2<'_, f64>> = batch.iter().map(|&i| inputs[i]).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            let mut g = Graph::new();
            let (z, stats) = model.forward(&mut g, &model.params, &xs, Mode::Train(&mut rng))?;
            let loss = g.weighted_cross_entropy(z, &ys, &weights)?;
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("training loss {value} at epoch {epoch}")));
            }
            let mut grads = g.backward(loss, &model.params)?;
            if let Some(max) = cfg.grad_clip {
                clip_grad_norm(&mut grads, max);
            }
            opt.step(&mut model.params, &grads, lr)?;
            if let Some(s) = stats {
                model.bn_stats.update(&s);
            }
            loss_sum += value * batch.len() as f64;
            seen += batch.len();
        }
        let val_auc = auc_on(&model, &split.validation)?;
        let train_loss = loss_sum / seen as f64;
        log::info!("epoch {epoch}: loss {train_loss:.5} val_auc {val_auc:.4} lr {lr:.2e}");
        history.epochs.push(EpochRecord { epoch, train_loss, val_auc, lr, wall_secs: started.elapsed().as_secs_f64() });
        let improved = match &best {
            None => true,
            Some((b, _)) => val_auc > b + MIN_IMPROVEMENT,
        };
        if improved {
            best = Some((val_auc, model.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    let (_, best_model) = best.expect("at least one epoch");
    Ok((best_model, history))
}
