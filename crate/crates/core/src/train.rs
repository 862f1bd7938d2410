//! Cross-entropy loss, SGD, and full training of a network with
//! per-epoch accuracy/loss logging.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Gradients, Network, Volume};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

/// Floor applied inside ln() so a zero probability cannot produce −∞.
pub const PROB_FLOOR: f64 = 1e-15;

/// Training hyperparameters. Defaults: lr 0.01, 50 epochs, batch 32,
/// validation fraction 0.2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 32,
            seed: 42,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::usage("learning_rate must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::usage("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::usage("batch_size must be >= 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::usage("validation_fraction must be in (0, 1)"));
        }
        Ok(())
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub train_cross_entropy: f64,
    pub validation_cross_entropy: f64,
}

/// Per-epoch training history, one entry per completed epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochLog {
    entries: Vec<EpochStats>,
}

impl EpochLog {
    pub fn push(&mut self, stats: EpochStats) {
        self.entries.push(stats);
    }

    pub fn entries(&self) -> &[EpochStats] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// −Σ_k t_k · ln(max(p_k, 1e−15)) for a one-hot target.
pub fn cross_entropy(probs: &[f64], target: &[f64]) -> Result<f64> {
    if probs.len() != target.len() {
        return Err(Error::shape(format!(
            "probability length {} does not match target length {}",
            probs.len(),
            target.len()
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::numeric(format!(
            "probabilities sum to {sum}, not 1"
        )));
    }
    let ones = target.iter().filter(|&&t| t == 1.0).count();
    if ones != 1 || target.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::usage("target must be one-hot"));
    }
    let loss = probs
        .iter()
        .zip(target)
        .map(|(&p, &t)| -t * p.max(PROB_FLOOR).ln())
        .sum();
    Ok(loss)
}

/// One SGD update: θ ← θ − lr·g, elementwise.
pub fn sgd_step(params: &mut [f64], grads: &[f64], learning_rate: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::contract(format!(
            "gradient length {} does not match parameter length {}",
            grads.len(),
            params.len()
        )));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= learning_rate * g;
    }
    Ok(())
}

pub(crate) fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut t = vec![0.0; classes];
    t[label] = 1.0;
    t
}

/// Converts a dataset to (volume, label) pairs, checking every image
/// against the network's declared input shape.
fn prepared_examples(net: &Network, ds: &Dataset) -> Result<Vec<(Volume, usize)>> {
    let expect = net.input_shape();
    let mut out = Vec::with_capacity(ds.len());
    for item in ds.items() {
        let v = item.image.to_volume();
        if v.dims() != expect {
            return Err(Error::shape(format!(
                "image {} is {}x{}x{}, network expects {}x{}x{}",
                item.id,
                v.dims().0,
                v.dims().1,
                v.dims().2,
                expect.0,
                expect.1,
                expect.2
            )));
        }
        out.push((v, item.label));
    }
    Ok(out)
}

fn split_accuracy_loss(net: &Network, examples: &[(Volume, usize)], classes: usize) -> Result<(f64, f64)> {
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    for (volume, label) in examples {
        let (probs, _) = net.forward(volume)?;
        if argmax(&probs) == *label {
            correct += 1;
        }
        loss_sum += cross_entropy(&probs, &one_hot(*label, classes))?;
    }
    let n = examples.len() as f64;
    Ok((correct as f64 / n, loss_sum / n))
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Trains every parameter of `net` with seeded, shuffled mini-batch SGD.
/// Returns the trained network and one [`EpochStats`] per epoch.
/// Deterministic given the initial network, the data, and the config seed.
pub fn train_full(
    net: &Network,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainConfig,
) -> Result<(Network, EpochLog)> {
    train_full_observed(net, train_set, val_set, config, &mut |_, _| {})
}

/// [`train_full`] with a per-epoch callback for progress reporting.
/// The observer receives the 1-based epoch number and its stats.
pub fn train_full_observed(
    net: &Network,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainConfig,
    observer: &mut dyn FnMut(usize, &EpochStats),
) -> Result<(Network, EpochLog)> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::usage("training and validation splits must be non-empty"));
    }
    let classes = net.class_count();
    for item in train_set.items().iter().chain(val_set.items()) {
        if item.label >= classes {
            return Err(Error::data(format!(
                "label {} out of range for {} classes",
                item.label, classes
            )));
        }
    }
    let train = prepared_examples(net, train_set)?;
    let val = prepared_examples(net, val_set)?;

    let mut net = net.clone();
    let mut log = EpochLog::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.epochs {
        // per-epoch shuffle stream derived from the run seed
        let mut rng = SplitMix64::new(config.seed ^ epoch as u64);
        rng.shuffle(&mut order);

        for batch in order.chunks(config.batch_size) {
            let mut acc = Gradients::zeros_like(&net);
            for &idx in batch {
                let (volume, label) = &train[idx];
                let (_, cache) = net.forward(volume)?;
                let grads = net.backward(&cache, &one_hot(*label, classes))?;
                acc.accumulate(&grads);
            }
            acc.scale(1.0 / batch.len() as f64);
            net.apply_gradients(&acc, config.learning_rate)?;
        }

        let (train_accuracy, train_cross_entropy) = split_accuracy_loss(&net, &train, classes)?;
        let (validation_accuracy, validation_cross_entropy) =
            split_accuracy_loss(&net, &val, classes)?;
        let stats = EpochStats {
            train_accuracy,
            validation_accuracy,
            train_cross_entropy,
            validation_cross_entropy,
        };
        observer(epoch + 1, &stats);
        log.push(stats);
    }

    Ok((net, log))
}

/// Accuracy and mean cross-entropy of a network over a dataset split.
pub fn evaluate_net(net: &Network, split: &Dataset) -> Result<(f64, f64)> {
    if split.is_empty() {
        return Err(Error::usage("cannot evaluate an empty split"));
    }
    let classes = net.class_count();
    for item in split.items() {
        if item.label >= classes {
            return Err(Error::data(format!(
                "label {} out of range for {} classes",
                item.label, classes
            )));
        }
    }
    let examples = prepared_examples(net, split)?;
    split_accuracy_loss(net, &examples, classes)
}

/// Class predictions (argmax of the probabilities) for a dataset split.
pub fn predict(net: &Network, split: &Dataset) -> Result<Vec<(usize, usize)>> {
    let examples = prepared_examples(net, split)?;
    let mut pairs = Vec::with_capacity(examples.len());
    for (volume, label) in &examples {
        let (probs, _) = net.forward(volume)?;
        pairs.push((*label, argmax(&probs)));
    }
    Ok(pairs)
}
