//! Mini-batch training with BCE/MAE and per-batch highest-loss removal.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::evaluation::{dice_bits, threshold_values};
use crate::nn::loss::{loss, sigmoid_loss, sigmoid_loss_backward};
use crate::nn::unet::ForwardCache;
use crate::nn::{adam_step, crop, lr_at_epoch, reflect_pad, uncrop, LossKind, ModelState, Padding, Scalar, Tensor, TrainHyper, UNet};
use crate::raster::BandMode;
use crate::rng::derive_indexed;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hyper: TrainHyper,
    pub loss: LossKind,
    pub drop_highest: bool,
    /// Samples removed per batch when `drop_highest` is set.
    pub drop_count: usize,
    pub band_mode: BandMode,
    pub seed: u64,
    /// Epochs between checkpoints; 0 disables them.
    pub checkpoint_every: usize,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hyper: TrainHyper::default(),
            loss: LossKind::Bce,
            drop_highest: false,
            drop_count: 1,
            band_mode: BandMode::OneBand,
            seed: 0,
            checkpoint_every: 1,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, net: &UNet) -> Result<()> {
        self.hyper.validate()?;
        let planes = self.band_mode.plane_count();
        if net.config().in_channels != planes {
            return Err(Error::Config(format!(
                "band mode {} has {planes} planes but the network expects {}",
                self.band_mode.name(),
                net.config().in_channels
            )));
        }
        if self.drop_highest && self.drop_count == 0 {
            return Err(Error::Config("drop_count must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        Ok(())
    }

    /// Samples dropped per batch.
    pub fn dropped_per_batch(&self) -> usize {
        if self.drop_highest {
            self.drop_count
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_dice: f64,
    pub val_dice: f64,
    pub lr: f64,
    pub dropped_sample_ids: Vec<String>,
}

/// Zeroes the `k` largest losses (ties to the lowest index) and averages
/// over the full batch. Returns the masked mean and dropped indices in
/// ascending order.
pub fn drop_highest_k(losses: &[f64], k: usize) -> (f64, Vec<usize>) {
    let b = losses.len();
    if b == 0 {
        return (0.0, Vec::new());
    }
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| losses[j].total_cmp(&losses[i]).then(i.cmp(&j)));
    let mut dropped: Vec<usize> = order.into_iter().take(k.min(b)).collect();
    dropped.sort_unstable();
    let kept: f64 = (0..b).filter(|i| !dropped.contains(i)).map(|i| losses[i]).sum();
    (kept / b as f64, dropped)
}

/// [`drop_highest_k`] with `k = 1`.
pub fn drop_highest_loss(losses: &[f64]) -> (f64, Option<usize>) {
    let (mean, dropped) = drop_highest_k(losses, 1);
    (mean, dropped.first().copied())
}

/// Forward pass over a batch, kept for a later backward pass.
pub struct BatchForward<T> {
    pad: Padding,
    cache: ForwardCache<T>,
    pub probs: Tensor<T>,
    pub losses: Vec<f64>,
}

impl<T: Scalar> BatchForward<T> {
    /// Pads to the pooling multiple, runs the network and scores the
    /// cropped probabilities against `targets`.
    pub fn run(net: &UNet, params: &[Tensor<T>], inputs: &Tensor<T>, targets: &Tensor<T>, kind: LossKind) -> Result<Self> {
        let pad = Padding::to_multiple(inputs.h(), inputs.w(), net.config().input_multiple());
        let (logits, cache) = net.forward(params, &reflect_pad(inputs, pad))?;
        let (probs, losses) = sigmoid_loss(kind, &crop(&logits, pad), targets)?;
        let losses: Vec<f64> = losses.iter().map(|l| l.as_f64()).collect();
        if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::Numerics(format!("loss of batch element {i} is not finite")));
        }
        Ok(Self { pad, cache, probs, losses })
    }

    /// Parameter gradients of `sum_i weights[i] * loss_i`.
    pub fn gradients(&self, net: &UNet, params: &[Tensor<T>], targets: &Tensor<T>, kind: LossKind, weights: &[T]) -> Result<Vec<Tensor<T>>> {
        let d_logits = sigmoid_loss_backward(kind, &self.probs, targets, weights)?;
        let grads = net.backward(params, &self.cache, &uncrop(&d_logits, self.pad))?;
        for g in &grads {
            g.check_finite("backward")?;
        }
        Ok(grads)
    }
}

/// Loss weights of one batch: `1/b` per sample, zero for dropped ones.
pub fn batch_weights<T: Scalar>(b: usize, dropped: &[usize]) -> Vec<T> {
    let w = T::one() / T::lit(b as f64);
    (0..b).map(|i| if dropped.contains(&i) { T::zero() } else { w }).collect()
}

fn stack_batch(batch: &[&Sample]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let inputs: Vec<Tensor<f32>> = batch.iter().map(|s| s.input_tensor()).collect();
    let targets: Vec<Tensor<f32>> = batch.iter().map(|s| s.label_tensor()).collect();
    Ok((
        Tensor::stack(&inputs.iter().collect::<Vec<_>>())?,
        Tensor::stack(&targets.iter().collect::<Vec<_>>())?,
    ))
}

fn check_samples(net: &UNet, samples: &[Sample], what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Empty(format!("{what} set is empty")));
    }
    let c = net.config().in_channels;
    if let Some(s) = samples.iter().find(|s| s.channels.len() != c) {
        return Err(Error::Shape(format!(
            "sample {} has {} channels, the network expects {c}",
            s.id,
            s.channels.len()
        )));
    }
    Ok(())
}

/// Mean per-sample loss and mean per-sample Dice of the thresholded
/// prediction.
pub fn validate(net: &UNet, params: &[Tensor<f32>], samples: &[Sample], kind: LossKind, threshold: f64) -> Result<(f64, f64)> {
    check_samples(net, samples, "validation")?;
    let mut loss_sum = 0.0;
    let mut dice_sum = 0.0;
    for s in samples {
        let prob = net.predict_any(params, &s.input_tensor())?;
        let target = s.label_tensor();
        loss_sum += loss(kind, &prob, &target)?[0] as f64;
        dice_sum += dice_bits(&threshold_values(prob.data(), threshold), s.label.bits());
    }
    let n = samples.len() as f64;
    Ok((loss_sum / n, dice_sum / n))
}

/// Called after every completed epoch.
pub trait TrainObserver {
    fn on_epoch(&mut self, record: &EpochRecord, state: &ModelState) -> Result<()>;
}

impl<F: FnMut(&EpochRecord, &ModelState) -> Result<()>> TrainObserver for F {
    fn on_epoch(&mut self, record: &EpochRecord, state: &ModelState) -> Result<()> {
        self(record, state)
    }
}

/// Training order of epoch `epoch`; depends only on the seed and epoch so
/// resumed runs replay it.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut derive_indexed(seed, epoch as u64));
    order
}

/// Trains epochs `start_epoch..cfg.hyper.epochs` in place. Samples must be
/// normalized already. On error `state` is restored to the end of the last
/// completed epoch.
pub fn train(
    net: &UNet,
    state: &mut ModelState,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
    start_epoch: usize,
    observer: &mut dyn TrainObserver,
) -> Result<Vec<EpochRecord>> {
    cfg.validate(net)?;
    check_samples(net, train_set, "training")?;
    check_samples(net, val_set, "validation")?;
    state.validate()?;
    let mut records = Vec::with_capacity(cfg.hyper.epochs.saturating_sub(start_epoch));
    for epoch in start_epoch..cfg.hyper.epochs {
        let snapshot = state.clone();
        match run_epoch(net, state, train_set, val_set, cfg, epoch) {
            Ok(record) => {
                observer.on_epoch(&record, state)?;
                log::info!(
                    "epoch {epoch}: train_loss {:.5} val_loss {:.5} val_dice {:.4}",
                    record.train_loss,
                    record.val_loss,
                    record.val_dice
                );
                records.push(record);
            }
            Err(e) => {
                *state = snapshot;
                return Err(e);
            }
        }
    }
    Ok(records)
}

fn run_epoch(
    net: &UNet,
    state: &mut ModelState,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochRecord> {
    let lr = lr_at_epoch(&cfg.hyper, epoch);
    let order = epoch_order(cfg.seed, epoch, train_set.len());
    let mut loss_sum = 0.0;
    let mut dice_sum = 0.0;
    let mut dropped_ids = Vec::new();
    for chunk in order.chunks(cfg.hyper.batch) {
        let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
        let b = batch.len();
        let (inputs, targets) = stack_batch(&batch)?;
        let fwd = BatchForward::run(net, &state.params, &inputs, &targets, cfg.loss)?;
        let (_, dropped) = drop_highest_k(&fwd.losses, cfg.dropped_per_batch());
        dropped_ids.extend(dropped.iter().map(|&i| batch[i].id.clone()));
        let weights: Vec<f32> = batch_weights(b, &dropped);
        loss_sum += fwd.losses.iter().sum::<f64>();
        for (i, s) in batch.iter().enumerate() {
            dice_sum += dice_bits(&threshold_values(fwd.probs.sample(i), cfg.threshold), s.label.bits());
        }
        // A fully dropped batch (b = 1) leaves the weights untouched.
        if weights.iter().any(|&w| w != 0.0) {
            let grads = fwd.gradients(net, &state.params, &targets, cfg.loss, &weights)?;
            adam_step(state, &grads, lr, &cfg.hyper)?;
        }
    }
    let n = train_set.len() as f64;
    let (val_loss, val_dice) = validate(net, &state.params, val_set, cfg.loss, cfg.threshold)?;
    Ok(EpochRecord {
        epoch,
        train_loss: loss_sum / n,
        val_loss,
        train_dice: dice_sum / n,
        val_dice,
        lr,
        dropped_sample_ids: dropped_ids,
    })
}
