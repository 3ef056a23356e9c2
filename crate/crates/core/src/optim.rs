//! Minibatch SGD with classical momentum and per-epoch exponential
//! learning-rate decay.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layers::{Gradients, LossOutput, Network};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub lr0: f64,
    pub momentum: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr0: 0.01,
            momentum: 0.9,
            decay: 0.95,
            epochs: 15,
            batch_size: 64,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr0 >= 0.0
            && self.lr0.is_finite()
            && (0.0..1.0).contains(&self.momentum)
            && self.decay > 0.0
            && self.decay <= 1.0
            && self.epochs > 0
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid SGD settings: {self:?}")))
        }
    }

    /// Learning rate in effect during epoch `e` (zero-based): `lr0·decayᵉ`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr0 * self.decay.powi(epoch as i32)
    }
}

/// `v ← μ·v − lr·g; w ← w + v` for each tensor.
pub fn sgd_step(params: &mut [&mut Tensor], grads: &[&Tensor], velocity: &mut [Tensor], lr: f64, momentum: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::InvalidTensor(format!(
            "sgd_step got {} params, {} grads, {} velocities",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for ((w, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        w.expect_same_shape(g, "sgd_step")?;
        w.expect_same_shape(v, "sgd_step")?;
        for ((wi, &gi), vi) in w.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vi = momentum * *vi - lr * gi;
            *wi += *vi;
        }
    }
    Ok(())
}

/// Momentum buffers for every parameter of a network.
#[derive(Clone, Debug)]
pub struct Momentum {
    velocity: Vec<Vec<Tensor>>,
}

impl Momentum {
    pub fn new(net: &mut Network) -> Self {
        let velocity = net
            .layer_params_mut()
            .iter()
            .map(|layer| layer.iter().map(|t| Tensor::zeros(t.shape())).collect())
            .collect();
        Momentum { velocity }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients, lr: f64, momentum: f64) -> Result<()> {
        let mut layers = net.layer_params_mut();
        if layers.len() != grads.layers.len() {
            return Err(Error::InvalidNetwork("gradient set does not match network".into()));
        }
        for ((params, g), v) in layers.iter_mut().zip(&grads.layers).zip(&mut self.velocity) {
            let g: Vec<&Tensor> = g.iter().collect();
            sgd_step(params, &g, v, lr, momentum)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// One-based epoch number.
    pub epoch: usize,
    /// Mean training cross-entropy over the epoch's minibatches.
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainStatus {
    Ok,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Cross-entropy over the whole training set before the first update.
    pub initial_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub status: TrainStatus,
    /// Epoch (one-based) in which a non-finite loss or gradient appeared.
    pub diverged_at: Option<usize>,
}

impl TrainLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.loss).min_by(f64::total_cmp)
    }

    /// Equality ignoring wall-clock columns.
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        let strip = |l: &TrainLog| {
            let mut l = l.clone();
            l.epochs.iter_mut().for_each(|e| e.seconds = 0.0);
            l
        };
        strip(self) == strip(other)
    }

    /// `epoch,loss,accuracy,lr,seconds`, one record per completed epoch.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,accuracy,lr,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{},{}", e.epoch, e.loss, e.accuracy, e.lr, e.seconds);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    /// Record per-epoch wall time; when off the column is written as 0 so
    /// logs are byte-reproducible.
    pub timing: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { timing: true }
    }
}

/// Mean loss and accuracy over a whole dataset, forward only.
pub fn evaluate_dataset(net: &Network, ds: &Dataset) -> Result<LossOutput> {
    const CHUNK: usize = 1000;
    let n = ds.len();
    let mut loss = 0.0;
    let mut correct = 0;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let (x, y) = ds.gather(&idx);
        let out = net.evaluate(&x, &y)?;
        loss += out.loss * (end - start) as f64;
        correct += out.correct;
        start = end;
    }
    Ok(LossOutput {
        loss: if n > 0 { loss / n as f64 } else { 0.0 },
        correct,
    })
}

/// Shuffled minibatch SGD for `cfg.epochs` epochs.
///
/// A non-finite loss or gradient stops training and marks the log as
/// diverged; the offending epoch is not recorded.
pub fn train(net: Network, ds: &Dataset, cfg: &SgdConfig, rng: &mut Rng) -> Result<(Network, TrainLog)> {
    train_with(net, ds, cfg, rng, TrainOptions::default())
}

pub fn train_with(
    mut net: Network,
    ds: &Dataset,
    cfg: &SgdConfig,
    rng: &mut Rng,
    opts: TrainOptions,
) -> Result<(Network, TrainLog)> {
    cfg.validate()?;
    let initial = evaluate_dataset(&net, ds)?;
    let mut log = TrainLog {
        initial_loss: initial.loss,
        epochs: Vec::with_capacity(cfg.epochs),
        status: TrainStatus::Ok,
        diverged_at: None,
    };
    if !initial.loss.is_finite() {
        log.status = TrainStatus::Diverged;
        log.diverged_at = Some(0);
        log.initial_loss = f64::MAX;
        return Ok((net, log));
    }
    let mut momentum = Momentum::new(&mut net);
    'epochs: for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = cfg.lr_at(epoch);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (x, y) in ds.batches(cfg.batch_size, rng) {
            let (out, grads) = net.loss_and_grad(&x, &y)?;
            if !out.loss.is_finite() || !grads.all_finite() {
                log.status = TrainStatus::Diverged;
                log.diverged_at = Some(epoch + 1);
                break 'epochs;
            }
            loss_sum += out.loss * y.len() as f64;
            correct += out.correct;
            momentum.step(&mut net, &grads, lr, cfg.momentum)?;
        }
        let n = ds.len().max(1) as f64;
        log.epochs.push(EpochRecord {
            epoch: epoch + 1,
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
            lr,
            seconds: if opts.timing {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
    }
    Ok((net, log))
}
