//! Training: data splitting, per-epoch sampling, SGD with momentum and the
//! two-phase learning-rate schedule.

mod checkpoint;

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctc::{ctc_gradient, ctc_neg_log_prob, LabelSequence};
use crate::error::{Error, Result};
use crate::net::{Network, NetworkSpec, WeightStore};
use crate::preproc::Raster;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// Weights are rounded to `f32` after every update.
    Single,
    Double,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub momentum: f64,
    pub main_lr: f64,
    pub post_lr: f64,
    pub main_epochs: u32,
    pub post_epochs: u32,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    /// Optional bound on the global L2 norm of each averaged batch gradient.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            momentum: 0.9,
            main_lr: 0.002,
            post_lr: 0.001,
            main_epochs: 100,
            post_epochs: 8,
            samples_per_epoch: 20_000,
            batch_size: 16,
            clip_norm: None,
            seed: 1,
            precision: Precision::Double,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter("momentum must be in [0, 1)".into()));
        }
        if !(self.main_lr > 0.0 && self.post_lr > 0.0) {
            return Err(Error::InvalidParameter("learning rates must be positive".into()));
        }
        if self.batch_size == 0 || self.samples_per_epoch == 0 {
            return Err(Error::InvalidParameter("batch size and epoch size must be positive".into()));
        }
        if matches!(self.clip_norm, Some(c) if c.is_nan() || c <= 0.0) {
            return Err(Error::InvalidParameter("clip norm must be positive".into()));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> u32 {
        self.main_epochs + self.post_epochs
    }

    /// Phase and learning rate of 1-based `epoch`.
    pub fn phase_of(&self, epoch: u32) -> (Phase, f64) {
        if epoch <= self.main_epochs {
            (Phase::Main, self.main_lr)
        } else {
            (Phase::Post, self.post_lr)
        }
    }

    /// Takes the epoch counts of one shipped network.
    pub fn with_schedule(mut self, schedule: &EpochSchedule) -> Self {
        self.main_epochs = schedule.main_epochs;
        self.post_epochs = schedule.post_epochs;
        self
    }
}

/// Epoch counts of the competition networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochSchedule {
    pub network: &'static str,
    pub main_epochs: u32,
    pub post_epochs: u32,
}

pub const EPOCH_SCHEDULES: [EpochSchedule; 9] = [
    EpochSchedule { network: "N1", main_epochs: 31, post_epochs: 8 },
    EpochSchedule { network: "N2", main_epochs: 54, post_epochs: 8 },
    EpochSchedule { network: "N3", main_epochs: 60, post_epochs: 9 },
    EpochSchedule { network: "R1", main_epochs: 100, post_epochs: 7 },
    EpochSchedule { network: "R2", main_epochs: 100, post_epochs: 10 },
    EpochSchedule { network: "A", main_epochs: 100, post_epochs: 6 },
    EpochSchedule { network: "M", main_epochs: 100, post_epochs: 9 },
    EpochSchedule { network: "B1", main_epochs: 67, post_epochs: 8 },
    EpochSchedule { network: "B2", main_epochs: 99, post_epochs: 8 },
];

pub fn epoch_schedule(network: &str) -> Option<&'static EpochSchedule> {
    EPOCH_SCHEDULES.iter().find(|s| s.network == network)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: usize,
    pub validation: usize,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio { train: 10, validation: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    /// Entries rejected as unusable.
    pub dropped: usize,
}

/// Drops unusable entries, shuffles the rest with `seed`, and cuts the
/// validation share (rounded to nearest) off the end.
pub fn split_dataset<T>(entries: Vec<T>, ratio: SplitRatio, seed: u64, is_usable: impl Fn(&T) -> bool) -> Result<SplitManifest<T>> {
    let parts = ratio.train + ratio.validation;
    if parts == 0 {
        return Err(Error::InvalidParameter("split ratio is 0:0".into()));
    }
    let total = entries.len();
    let mut usable: Vec<T> = entries.into_iter().filter(|e| is_usable(e)).collect();
    let dropped = total - usable.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    usable.shuffle(&mut rng);
    let n_val = (usable.len() * ratio.validation + parts / 2) / parts;
    let validation = usable.split_off(usable.len() - n_val);
    Ok(SplitManifest { train: usable, validation, dropped })
}

fn epoch_seed(seed: u64, epoch: u32) -> u64 {
    seed ^ (u64::from(epoch).wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Indices of the `k` training entries used in `epoch`: a prefix of a
/// permutation seeded by `(seed, epoch)`. The whole set when `k ≥ len`.
pub fn epoch_sample(len: usize, k: usize, epoch: u32, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(seed, epoch));
    idx.shuffle(&mut rng);
    idx.truncate(k.min(len));
    idx
}

/// `velocity ← momentum·velocity − lr·gradient; weight ← weight + velocity`.
pub fn sgd_momentum_step(weights: &mut WeightStore, velocity: &mut WeightStore, grads: &WeightStore, lr: f64, momentum: f64) {
    for ((w, v), g) in weights.iter_mut().zip(velocity.iter_mut()).zip(grads.iter()) {
        *v = momentum * *v - lr * g;
        *w += *v;
    }
}

/// One normalized writing and its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub raster: Raster,
    pub labels: LabelSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    /// `+inf` when the image is too narrow for the labels.
    pub loss: f64,
    pub grads: Option<WeightStore>,
}

impl SampleOutcome {
    pub fn feasible(&self) -> bool {
        self.loss != f64::INFINITY
    }
}

/// CTC loss of one sample, with parameter gradients when asked.
pub fn evaluate_sample(net: &Network, sample: &Sample, want_grad: bool) -> Result<SampleOutcome> {
    if !want_grad {
        let m = net.forward(&sample.raster)?;
        return Ok(SampleOutcome { loss: ctc_neg_log_prob(&m, &sample.labels), grads: None });
    }
    let trace = net.trace(&sample.raster)?;
    let ctc = ctc_gradient(trace.output(), &sample.labels);
    if !ctc.feasible {
        return Ok(SampleOutcome { loss: f64::INFINITY, grads: None });
    }
    let grads = net.backward(&trace, &ctc.grad)?;
    Ok(SampleOutcome { loss: ctc.neg_log_prob, grads: Some(grads) })
}

/// Strategy for evaluating a batch against read-only weights. Results must
/// come back in batch order so that reductions are reproducible.
pub trait BatchEvaluator {
    fn evaluate(&self, net: &Network, batch: &[&Sample], want_grad: bool) -> Result<Vec<SampleOutcome>>;
}

/// Evaluates samples one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchEvaluator for Sequential {
    fn evaluate(&self, net: &Network, batch: &[&Sample], want_grad: bool) -> Result<Vec<SampleOutcome>> {
        batch.iter().map(|s| evaluate_sample(net, s, want_grad)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Main,
    Post,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Main => "main",
            Phase::Post => "post",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: u32,
    pub phase: Phase,
    pub lr: f64,
    pub train_loss: f64,
    pub validation_loss: f64,
    /// Samples skipped because they were too narrow for their labels.
    pub skipped: u32,
}

impl EpochRecord {
    /// Tab-separated training-log line: epoch, phase, lr, train loss,
    /// validation loss.
    pub fn log_line(&self) -> alloc::string::String {
        alloc::format!("{}\t{}\t{}\t{:.6}\t{:.6}", self.epoch, self.phase.as_str(), self.lr, self.train_loss, self.validation_loss)
    }
}

/// Training stopped early. `last_good` is the most recent checkpoint whose
/// losses were all finite.
#[derive(Debug, Clone)]
pub struct TrainFailure {
    pub error: Error,
    pub last_good: Option<Box<Checkpoint>>,
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        TrainFailure { error, last_good: None }
    }
}

fn round_to_single(w: &mut WeightStore) {
    w.iter_mut().for_each(|v| *v = *v as f32 as f64);
}

/// Mean loss over the feasible samples, with the number skipped.
pub fn mean_loss<E: BatchEvaluator>(net: &Network, samples: &[Sample], evaluator: &E, batch_size: usize) -> Result<(f64, u32)> {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut skipped = 0u32;
    let refs: Vec<&Sample> = samples.iter().collect();
    for chunk in refs.chunks(batch_size.max(1)) {
        for out in evaluator.evaluate(net, chunk, false)? {
            if out.feasible() {
                sum += out.loss;
                n += 1;
            } else {
                skipped += 1;
            }
        }
    }
    Ok((if n == 0 { f64::NAN } else { sum / n as f64 }, skipped))
}

/// Trains a fresh network for the full schedule.
pub fn train<E: BatchEvaluator>(
    config: &TrainConfig,
    spec: &NetworkSpec,
    train_set: &[Sample],
    validation: &[Sample],
    evaluator: &E,
    on_epoch: impl FnMut(&Checkpoint) -> Result<()>,
) -> core::result::Result<Checkpoint, TrainFailure> {
    let start = Checkpoint::initial(spec.clone(), config.seed)?;
    train_from(config, start, train_set, validation, evaluator, on_epoch)
}

/// Continues training from `start` until `config.total_epochs()`.
///
/// Each epoch draws `samples_per_epoch` training samples, updates the
/// weights once per mini-batch with the batch-averaged gradient, then
/// measures the mean validation loss and hands a checkpoint to `on_epoch`.
pub fn train_from<E: BatchEvaluator>(
    config: &TrainConfig,
    start: Checkpoint,
    train_set: &[Sample],
    validation: &[Sample],
    evaluator: &E,
    mut on_epoch: impl FnMut(&Checkpoint) -> Result<()>,
) -> core::result::Result<Checkpoint, TrainFailure> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()).into());
    }
    let mut cp = start;
    let mut net = Network::from_parts(cp.spec.clone(), cp.weights.clone())?;
    if config.precision == Precision::Single {
        round_to_single(net.weights_mut());
    }
    let mut velocity = cp.velocities.clone();
    if cp.history.is_empty() && cp.initial_validation_loss.is_nan() && !validation.is_empty() {
        cp.initial_validation_loss = mean_loss(&net, validation, evaluator, config.batch_size)?.0;
    }

    for epoch in cp.epoch + 1..=config.total_epochs() {
        let (phase, lr) = config.phase_of(epoch);
        let order = epoch_sample(train_set.len(), config.samples_per_epoch, epoch, config.seed);
        let mut loss_sum = 0.0;
        let mut counted = 0usize;
        let mut skipped = 0u32;
        let fail = |cp: &Checkpoint, error| TrainFailure { error, last_good: Some(Box::new(cp.clone())) };

        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let outcomes = evaluator.evaluate(&net, &batch, true).map_err(|e| fail(&cp, e))?;
            let mut grad: Option<WeightStore> = None;
            let mut n = 0usize;
            for out in outcomes {
                if !out.feasible() {
                    skipped += 1;
                    continue;
                }
                if !out.loss.is_finite() {
                    return Err(fail(&cp, Error::Diverged { epoch }));
                }
                loss_sum += out.loss;
                counted += 1;
                n += 1;
                if let Some(g) = out.grads {
                    match grad.as_mut() {
                        Some(acc) => acc.add_scaled(&g, 1.0),
                        None => grad = Some(g),
                    }
                }
            }
            let Some(mut grad) = grad else { continue };
            grad.scale(1.0 / n as f64);
            if let Some(limit) = config.clip_norm {
                let norm = grad.l2_norm();
                if norm > limit {
                    grad.scale(limit / norm);
                }
            }
            sgd_momentum_step(net.weights_mut(), &mut velocity, &grad, lr, config.momentum);
            if config.precision == Precision::Single {
                round_to_single(net.weights_mut());
            }
            if !net.weights().all_finite() {
                return Err(fail(&cp, Error::Diverged { epoch }));
            }
        }

        let train_loss = if counted == 0 { f64::NAN } else { loss_sum / counted as f64 };
        let validation_loss = if validation.is_empty() {
            f64::NAN
        } else {
            mean_loss(&net, validation, evaluator, config.batch_size).map_err(|e| fail(&cp, e))?.0
        };
        if counted > 0 && !train_loss.is_finite() || (!validation.is_empty() && !validation_loss.is_finite()) {
            return Err(fail(&cp, Error::Diverged { epoch }));
        }
        cp = Checkpoint {
            spec: cp.spec.clone(),
            weights: net.weights().clone(),
            velocities: velocity.clone(),
            epoch,
            seed: config.seed,
            initial_validation_loss: cp.initial_validation_loss,
            history: {
                let mut h = cp.history.clone();
                h.push(EpochRecord { epoch, phase, lr, train_loss, validation_loss, skipped });
                h
            },
        };
        on_epoch(&cp).map_err(|e| fail(&cp, e))?;
    }
    Ok(cp)
}
