use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{top_k, Network};
use crate::dataset::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate of the last epoch as a fraction of `learning_rate`;
    /// the rate falls linearly in between. 1.0 keeps it constant.
    pub final_lr_ratio: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Learning rate used during `epoch` (1-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.learning_rate;
        }
        let t = (epoch.saturating_sub(1)) as f64 / (self.epochs - 1) as f64;
        self.learning_rate * (1.0 - (1.0 - self.final_lr_ratio) * t.min(1.0))
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 60, batch_size: 32, learning_rate: 0.3, final_lr_ratio: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_err: f64,
    pub test_err: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_err,test_err\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{:.10},{:.6},{:.6}\n", r.epoch, r.train_loss, r.train_err, r.test_err));
        }
        s
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// First epoch whose test error is at or below `threshold`.
    pub fn epochs_to_test_error(&self, threshold: f64) -> Option<usize> {
        self.epochs.iter().find(|r| r.test_err <= threshold).map(|r| r.epoch)
    }
}

/// An item is counted correct when the top-k outputs, with k the number of
/// positive labels, are exactly the positive positions.
pub fn is_correct(output: &[f64], label: &[f64]) -> bool {
    let truth: Vec<usize> = label.iter().enumerate().filter(|(_, &v)| v > 0.5).map(|(j, _)| j).collect();
    top_k(output, truth.len()) == truth
}

/// Top-k predictions for the given items, with k the number of positive labels.
pub fn predict_items(net: &Network, ds: &LabeledDataset, idx: &[usize]) -> Result<Vec<Vec<usize>>> {
    let (x, _) = ds.gather(idx);
    let out = net.predict_many(&x, idx.len())?;
    let n_out = net.output_len();
    Ok(idx.iter().enumerate().map(|(r, &i)| top_k(&out[r * n_out..(r + 1) * n_out], ds.positives(i).len())).collect())
}

pub fn error_rate(net: &Network, ds: &LabeledDataset, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let pred = predict_items(net, ds, idx)?;
    let wrong = idx.iter().zip(&pred).filter(|(&i, p)| **p != ds.positives(i)).count();
    Ok(wrong as f64 / idx.len() as f64)
}

pub fn train(net: &mut Network, ds: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainingLog> {
    train_with(net, ds, cfg, |_| {})
}

/// Mini-batch SGD. Training items are first put in id order and then
/// shuffled per epoch from the seed, so the result does not depend on how the
/// dataset happens to be stored.
pub fn train_with(
    net: &mut Network,
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainingLog> {
    if ds.is_empty() {
        return Err(Error::input("empty dataset"));
    }
    if ds.input_len() != net.input_len() || ds.label_dim() != net.output_len() {
        return Err(Error::shape(format!(
            "dataset {:?} -> {} does not fit network {:?} -> {}",
            ds.input_shape(),
            ds.label_dim(),
            net.input_shape(),
            net.output_len()
        )));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(Error::spec("batch size must be positive and learning rate finite"));
    }
    if !(0.0..=1.0).contains(&cfg.final_lr_ratio) {
        return Err(Error::spec("final_lr_ratio must lie in [0, 1]"));
    }
    let mut train_idx = ds.indices(Split::Train);
    if train_idx.is_empty() && cfg.epochs > 0 {
        return Err(Error::input("dataset has no training items"));
    }
    train_idx.sort_by_key(|&i| (ds.id(i), i));
    let test_idx = ds.indices(Split::Test);
    let mut log = TrainingLog::default();
    for epoch in 1..=cfg.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut rng::rng_for(cfg.seed, &[0x65706f6368, epoch as u64]));
        let (mut loss_sum, mut wrong) = (0.0, 0usize);
        let n_out = net.output_len();
        let lr = cfg.learning_rate_at(epoch);
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = ds.gather(chunk);
            let (loss, pred) = net.step_with_predictions(&x, &y, chunk.len(), lr)?;
            loss_sum += loss * chunk.len() as f64;
            wrong += (0..chunk.len())
                .filter(|&r| !is_correct(&pred[r * n_out..(r + 1) * n_out], &y[r * n_out..(r + 1) * n_out]))
                .count();
        }
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            train_err: wrong as f64 / order.len() as f64,
            test_err: error_rate(net, ds, &test_idx)?,
        };
        on_epoch(&rec);
        log.epochs.push(rec);
    }
    Ok(log)
}
