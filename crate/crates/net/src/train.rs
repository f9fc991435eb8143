//! Mini-batch training with masked cross-entropy, and batched evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use semgrid_core::{
    masked_cross_entropy, mean_iou, stack_one_hot, GridGeometry, GridSequenceDataset, IouCounts, PreparedSample,
    ProbabilisticGrid, Split, NUM_CLASSES,
};

use crate::error::{Error, Result};
use crate::network::EdNetwork;
use crate::tensor::{NetScalar, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// First epoch (0-based) trained with `dropped_learning_rate`.
    pub lr_drop_epoch: Option<usize>,
    pub dropped_learning_rate: f64,
    /// Horizon of the training and validation targets.
    pub horizon: usize,
    /// Feed synchronized inputs; off trains the no-translation variant.
    pub translate: bool,
    pub bottom_exclude: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 32,
            learning_rate: 1e-3,
            lr_drop_epoch: Some(35),
            dropped_learning_rate: 1e-4,
            horizon: 1,
            translate: true,
            bottom_exclude: 0,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.horizon == 0 {
            return Err(Error::Config("epochs, batch size and horizon must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.dropped_learning_rate > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_drop_epoch {
            Some(e) if epoch >= e => self.dropped_learning_rate,
            _ => self.learning_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_miou: Option<f64>,
}

/// Prepares every sequence of one split for `horizon`.
pub fn prepare_split(
    dataset: &GridSequenceDataset,
    split: Split,
    horizon: usize,
    translate: bool,
    bottom_exclude: usize,
) -> Result<Vec<PreparedSample>> {
    dataset.split(split).iter().map(|s| s.prepare(horizon, translate, bottom_exclude).map_err(Error::from)).collect()
}

/// One-hot input tensor for a batch of samples.
pub fn input_tensor<T: NetScalar>(samples: &[&PreparedSample]) -> Result<Tensor<T>> {
    let first = samples.first().ok_or(Error::EmptyDataset)?;
    let geo = first.target.geometry;
    let c = first.inputs.len() * NUM_CLASSES;
    let mut data = Vec::with_capacity(samples.len() * c * geo.len());
    for s in samples {
        if s.inputs.len() * NUM_CLASSES != c || s.inputs.iter().any(|g| g.geometry != geo) {
            return Err(Error::Shape("samples in a batch differ in inputs or geometry".into()));
        }
        data.extend(stack_one_hot::<T>(&s.inputs));
    }
    Tensor::from_vec(samples.len(), c, geo.height, geo.width, data)
}

/// Sample `i` of a `N × F × H × W` output as a cell-major score grid.
pub fn output_grid<T: NetScalar>(probs: &Tensor<T>, i: usize, geometry: GridGeometry) -> Result<ProbabilisticGrid<T>> {
    let hw = probs.plane();
    if probs.c != NUM_CLASSES || hw != geometry.len() {
        return Err(Error::Shape(format!("output {:?} does not match the grid geometry", probs.shape())));
    }
    let s = probs.sample(i);
    let mut features = vec![T::zero(); hw * NUM_CLASSES];
    for k in 0..NUM_CLASSES {
        for cell in 0..hw {
            features[cell * NUM_CLASSES + k] = s[k * hw + cell];
        }
    }
    Ok(ProbabilisticGrid::new(geometry, features)?)
}

/// Mean masked cross-entropy of a batch and its gradient with respect to
/// the network output.
pub fn batch_loss<T: NetScalar>(probs: &Tensor<T>, samples: &[&PreparedSample]) -> Result<(T, Tensor<T>)> {
    let hw = probs.plane();
    let inv_n = T::one() / T::of(samples.len() as f64);
    let mut dprobs = Tensor::zeros(probs.n, probs.c, probs.h, probs.w);
    let mut total = T::zero();
    for (i, s) in samples.iter().enumerate() {
        let pred = output_grid(probs, i, s.target.geometry)?;
        let (loss, grad) = masked_cross_entropy(&pred, &s.target, &s.mask)?;
        total += loss;
        let d = dprobs.sample_mut(i);
        for (j, &g) in grad.iter().enumerate() {
            if g != T::zero() {
                d[(j % NUM_CLASSES) * hw + j / NUM_CLASSES] = g * inv_n;
            }
        }
    }
    Ok((total * inv_n, dprobs))
}

/// One optimization step on a batch; returns the batch loss.
pub fn train_step<T: NetScalar>(
    net: &mut EdNetwork<T>,
    samples: &[&PreparedSample],
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let x = input_tensor::<T>(samples)?;
    let cache = net.forward(&x, rng)?;
    let (loss, dprobs) = batch_loss(&cache.probs, samples)?;
    let grads = net.backward(&cache, &dprobs)?;
    net.update_running_stats(&cache);
    net.rmsprop_step(&grads, T::of(lr))?;
    Ok(loss.to_f64_lossless())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub counts: IouCounts,
}

/// Eval-mode class probabilities for every sample.
pub fn predict_samples<T: NetScalar>(
    net: &EdNetwork<T>,
    samples: &[PreparedSample],
    batch_size: usize,
) -> Result<Vec<ProbabilisticGrid<T>>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&PreparedSample> = chunk.iter().collect();
        let probs = net.predict(&input_tensor(&refs)?)?;
        for (i, s) in chunk.iter().enumerate() {
            out.push(output_grid(&probs, i, s.target.geometry)?);
        }
    }
    Ok(out)
}

/// Mean masked loss and pooled IoU counts of the argmax predictions.
pub fn evaluate<T: NetScalar>(net: &EdNetwork<T>, samples: &[PreparedSample], batch_size: usize) -> Result<Evaluation> {
    let mut eval = Evaluation::default();
    if samples.is_empty() {
        return Ok(eval);
    }
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&PreparedSample> = chunk.iter().collect();
        let probs = net.predict(&input_tensor(&refs)?)?;
        let (loss, _) = batch_loss(&probs, &refs)?;
        eval.loss += loss.to_f64_lossless() * chunk.len() as f64;
        for (i, s) in chunk.iter().enumerate() {
            let pred = output_grid(&probs, i, s.target.geometry)?.argmax(s.target.timestamp);
            eval.counts.add(&pred, &s.target, Some(&s.mask))?;
        }
    }
    eval.loss /= samples.len() as f64;
    Ok(eval)
}

/// Trains on prepared samples. Shuffling and dropout draw from one
/// generator seeded with `seed`, so a run is reproducible bit for bit.
pub fn train_samples<T: NetScalar>(
    net: &mut EdNetwork<T>,
    train: &[PreparedSample],
    validation: &[PreparedSample],
    schedule: &Schedule,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochLog, &EdNetwork<T>),
) -> Result<Vec<EpochLog>> {
    schedule.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(schedule.epochs);
    for epoch in 0..schedule.epochs {
        let lr = schedule.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(schedule.batch_size) {
            let refs: Vec<&PreparedSample> = batch.iter().map(|&i| &train[i]).collect();
            total += train_step(net, &refs, lr, &mut rng)? * batch.len() as f64;
        }
        let (val_loss, val_miou) = if validation.is_empty() {
            (None, None)
        } else {
            let e = evaluate(net, validation, schedule.batch_size)?;
            (Some(e.loss), mean_iou(&e.counts.per_class()))
        };
        let entry = EpochLog { epoch, learning_rate: lr, train_loss: total / train.len() as f64, val_loss, val_miou };
        on_epoch(&entry, net);
        log.push(entry);
    }
    Ok(log)
}

/// Trains on a dataset's training split and validates on its validation
/// split after every epoch.
pub fn train<T: NetScalar>(
    net: &mut EdNetwork<T>,
    dataset: &GridSequenceDataset,
    schedule: &Schedule,
    seed: u64,
) -> Result<Vec<EpochLog>> {
    schedule.validate()?;
    let prep = |split| prepare_split(dataset, split, schedule.horizon, schedule.translate, schedule.bottom_exclude);
    let train = prep(Split::Train)?;
    let validation = prep(Split::Validation)?;
    train_samples(net, &train, &validation, schedule, seed, |_, _| {})
}
