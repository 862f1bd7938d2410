//! Transfer learning: freeze the feature extractor, cache its output
//! per image (the bottleneck features), and retrain only a fresh dense
//! softmax head on those vectors.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::{dense_forward, softmax, DenseParams, Network};
use crate::rng::SplitMix64;
use crate::train::{argmax, cross_entropy, one_hot, sgd_step, EpochLog, EpochStats, TrainConfig};
use serde::{Deserialize, Serialize};

/// Bottleneck feature vectors keyed by image id, sorted by id, plus the
/// SHA-256 fingerprint of the frozen prefix that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckCache {
    fingerprint: String,
    vector_len: usize,
    entries: Vec<(String, Vec<f64>)>,
}

impl BottleneckCache {
    pub fn new(fingerprint: String, entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut entries = entries;
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let vector_len = entries.first().map(|(_, v)| v.len()).unwrap_or(0);
        if entries.iter().any(|(_, v)| v.len() != vector_len) {
            return Err(Error::contract(
                "all bottleneck vectors must have the same length",
            ));
        }
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::contract("bottleneck ids must be unique"));
        }
        Ok(BottleneckCache {
            fingerprint,
            vector_len,
            entries,
        })
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn vector_len(&self) -> usize {
        self.vector_len
    }

    pub fn entries(&self) -> &[(String, Vec<f64>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rejects reuse against a network whose frozen prefix differs from
    /// the one that produced this cache.
    pub fn verify_against(&self, net: &Network) -> Result<()> {
        let current = net.prefix_sha256()?;
        if current != self.fingerprint {
            return Err(Error::contract(format!(
                "stale bottleneck cache: prefix fingerprint {} does not match network {}",
                self.fingerprint, current
            )));
        }
        Ok(())
    }
}

/// Labels for the cache's entries, in cache order, looked up by image
/// id in the dataset. Errors if the cache and dataset cover different
/// images.
pub fn labels_for_cache(cache: &BottleneckCache, ds: &Dataset) -> Result<Vec<usize>> {
    if cache.len() != ds.len() {
        return Err(Error::contract(format!(
            "cache covers {} images, dataset has {}",
            cache.len(),
            ds.len()
        )));
    }
    // both sides are sorted by id, so walk them in lockstep
    cache
        .entries()
        .iter()
        .zip(ds.items())
        .map(|((cache_id, _), item)| {
            if *cache_id != item.id {
                return Err(Error::contract(format!(
                    "cache entry {cache_id} does not match dataset item {}",
                    item.id
                )));
            }
            Ok(item.label)
        })
        .collect()
}

/// Runs the frozen prefix over every image once, producing a reusable
/// cache of bottleneck features.
pub fn extract_bottlenecks(net: &Network, ds: &Dataset) -> Result<BottleneckCache> {
    if ds.is_empty() {
        return Err(Error::usage("cannot extract bottlenecks of an empty dataset"));
    }
    let fingerprint = net.prefix_sha256()?;
    let mut entries = Vec::with_capacity(ds.len());
    for item in ds.items() {
        let features = net.forward_prefix(&item.image.to_volume())?;
        entries.push((item.id.clone(), features));
    }
    BottleneckCache::new(fingerprint, entries)
}

/// Head state during retraining: a dense layer followed by softmax.
fn head_forward(head: &DenseParams, features: &[f64]) -> Result<Vec<f64>> {
    softmax(&dense_forward(features, head)?)
}

fn head_split_stats(
    head: &DenseParams,
    cache: &BottleneckCache,
    labels: &[usize],
    indices: &[usize],
    classes: usize,
) -> Result<(f64, f64)> {
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    for &i in indices {
        let probs = head_forward(head, &cache.entries()[i].1)?;
        if argmax(&probs) == labels[i] {
            correct += 1;
        }
        loss_sum += cross_entropy(&probs, &one_hot(labels[i], classes))?;
    }
    let n = indices.len() as f64;
    Ok((correct as f64 / n, loss_sum / n))
}

/// Splits example indices per label group: round(fraction·n) to the
/// validation side, at least 1 and at most n−1 per group when the group
/// has 2+ members.
fn validation_split(
    labels: &[usize],
    classes: usize,
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = SplitMix64::new(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..classes {
        let mut group: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if group.is_empty() {
            continue;
        }
        if group.len() == 1 {
            train.push(group[0]);
            continue;
        }
        rng.shuffle(&mut group);
        let n = group.len();
        let n_val = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        for (k, idx) in group.into_iter().enumerate() {
            if k < n_val {
                val.push(idx);
            } else {
                train.push(idx);
            }
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Trains a fresh dense softmax head on cached bottleneck vectors with
/// seeded mini-batch SGD. `labels` aligns with the cache's (sorted)
/// entry order. The frozen prefix is never touched — this function
/// never sees it.
pub fn retrain_head(
    cache: &BottleneckCache,
    labels: &[usize],
    class_count: usize,
    config: &TrainConfig,
) -> Result<(DenseParams, EpochLog)> {
    retrain_head_observed(cache, labels, class_count, config, &mut |_, _| {})
}

/// [`retrain_head`] with a per-epoch callback for progress reporting.
pub fn retrain_head_observed(
    cache: &BottleneckCache,
    labels: &[usize],
    class_count: usize,
    config: &TrainConfig,
    observer: &mut dyn FnMut(usize, &EpochStats),
) -> Result<(DenseParams, EpochLog)> {
    config.validate()?;
    if cache.is_empty() {
        return Err(Error::usage("bottleneck cache is empty"));
    }
    if labels.len() != cache.len() {
        return Err(Error::contract(format!(
            "label count {} does not match cache size {}",
            labels.len(),
            cache.len()
        )));
    }
    if class_count == 0 {
        return Err(Error::usage("class_count must be >= 1"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::data(format!(
            "label {bad} out of range for {class_count} classes"
        )));
    }

    let (train_idx, val_idx) =
        validation_split(labels, class_count, config.validation_fraction, config.seed);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::usage(
            "not enough examples per class for a validation split",
        ));
    }

    let mut rng = SplitMix64::new(config.seed);
    let mut head = DenseParams::glorot(class_count, cache.vector_len(), &mut rng);
    let mut log = EpochLog::default();
    let mut order = train_idx.clone();

    for epoch in 0..config.epochs {
        let mut shuffle_rng = SplitMix64::new(config.seed ^ epoch as u64);
        shuffle_rng.shuffle(&mut order);

        for batch in order.chunks(config.batch_size) {
            let mut dweights = vec![0.0; head.weights.len()];
            let mut dbiases = vec![0.0; head.biases.len()];
            for &i in batch {
                let features = &cache.entries()[i].1;
                let probs = head_forward(&head, features)?;
                let target = one_hot(labels[i], class_count);
                // softmax + cross-entropy gradient at the logits: p − t
                for (u, (p, t)) in probs.iter().zip(&target).enumerate() {
                    let g = p - t;
                    dbiases[u] += g;
                    let row = &mut dweights[u * head.in_units..(u + 1) * head.in_units];
                    for (slot, x) in row.iter_mut().zip(features) {
                        *slot += g * x;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            dweights.iter_mut().for_each(|g| *g *= scale);
            dbiases.iter_mut().for_each(|g| *g *= scale);
            sgd_step(&mut head.weights, &dweights, config.learning_rate)?;
            sgd_step(&mut head.biases, &dbiases, config.learning_rate)?;
        }

        let (train_accuracy, train_cross_entropy) =
            head_split_stats(&head, cache, labels, &train_idx, class_count)?;
        let (validation_accuracy, validation_cross_entropy) =
            head_split_stats(&head, cache, labels, &val_idx, class_count)?;
        let stats = EpochStats {
            train_accuracy,
            validation_accuracy,
            train_cross_entropy,
            validation_cross_entropy,
        };
        observer(epoch + 1, &stats);
        log.push(stats);
    }

    Ok((head, log))
}

/// Accuracy and mean cross-entropy of a trained head over feature
/// vectors with aligned labels.
pub fn evaluate_head(
    head: &DenseParams,
    features: &[Vec<f64>],
    labels: &[usize],
) -> Result<(f64, f64)> {
    if features.is_empty() {
        return Err(Error::usage("cannot evaluate an empty split"));
    }
    if features.len() != labels.len() {
        return Err(Error::contract("feature/label count mismatch"));
    }
    let classes = head.out_units;
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    for (x, &label) in features.iter().zip(labels) {
        if label >= classes {
            return Err(Error::data(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let probs = head_forward(head, x)?;
        if argmax(&probs) == label {
            correct += 1;
        }
        loss_sum += cross_entropy(&probs, &one_hot(label, classes))?;
    }
    let n = features.len() as f64;
    Ok((correct as f64 / n, loss_sum / n))
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheHeader {
    fingerprint: String,
    vector_len: usize,
    count: usize,
}

/// Serializes a cache: one JSON header line, then one row per image:
/// `<id>,<v1>,…,<vn>` with full-precision decimals.
pub fn cache_to_string(cache: &BottleneckCache) -> String {
    let header = CacheHeader {
        fingerprint: cache.fingerprint().to_string(),
        vector_len: cache.vector_len(),
        count: cache.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serialization");
    out.push('\n');
    for (id, features) in cache.entries() {
        out.push_str(id);
        for v in features {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn cache_from_string(text: &str) -> Result<BottleneckCache> {
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::data("bottleneck cache file is empty"))?;
    let header: CacheHeader = serde_json::from_str(header_line)?;
    let mut entries = Vec::with_capacity(header.count);
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let id = cells
            .next()
            .ok_or_else(|| Error::data("bottleneck row missing id"))?
            .to_string();
        let features = cells
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::data(format!("bad feature value {c:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if features.len() != header.vector_len {
            return Err(Error::data(format!(
                "bottleneck row for {id} has {} values, header says {}",
                features.len(),
                header.vector_len
            )));
        }
        entries.push((id, features));
    }
    if entries.len() != header.count {
        return Err(Error::data(format!(
            "bottleneck cache has {} rows, header says {}",
            entries.len(),
            header.count
        )));
    }
    BottleneckCache::new(header.fingerprint, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_shapes;

    fn tiny_net() -> Network {
        Network::small_cnn((3, 16, 16), 3, 77).unwrap()
    }

    #[test]
    fn cached_vectors_equal_direct_prefix_output() {
        let net = tiny_net();
        let ds = synth_shapes(2, 16, 4).unwrap();
        let cache = extract_bottlenecks(&net, &ds).unwrap();
        assert_eq!(cache.len(), ds.len());
        for (item, (id, features)) in ds.items().iter().zip(cache.entries()) {
            assert_eq!(&item.id, id);
            let direct = net.forward_prefix(&item.image.to_volume()).unwrap();
            assert_eq!(features, &direct);
        }
    }

    #[test]
    fn vector_length_matches_prefix_output_width() {
        let net = tiny_net();
        let ds = synth_shapes(1, 16, 4).unwrap();
        let cache = extract_bottlenecks(&net, &ds).unwrap();
        // 16 channels at 4x4 after two 2x2 pools of a 16x16 input
        assert_eq!(cache.vector_len(), 16 * 4 * 4);
        assert!(cache.entries().iter().all(|(_, v)| v.len() == 16 * 4 * 4));
    }

    #[test]
    fn mutated_prefix_invalidates_cache() {
        let mut net = tiny_net();
        let ds = synth_shapes(1, 16, 4).unwrap();
        let cache = extract_bottlenecks(&net, &ds).unwrap();
        cache.verify_against(&net).unwrap();

        let mut params = net.flat_params();
        params[0] += 1e-9;
        net.set_flat_params(&params).unwrap();
        assert!(matches!(
            cache.verify_against(&net),
            Err(Error::Contract(_))
        ));
        let fresh = extract_bottlenecks(&net, &ds).unwrap();
        assert_ne!(fresh.fingerprint(), cache.fingerprint());
    }

    #[test]
    fn separable_clusters_reach_full_train_accuracy() {
        // two disjoint clusters in feature space
        let mut entries = Vec::new();
        let mut labels = Vec::new();
        let mut rng = SplitMix64::new(3);
        for i in 0..30 {
            let base = if i % 2 == 0 { 2.0 } else { -2.0 };
            entries.push((
                format!("img_{i:03}"),
                vec![base + rng.uniform(-0.2, 0.2), -base + rng.uniform(-0.2, 0.2)],
            ));
            labels.push(i % 2);
        }
        let cache = BottleneckCache::new("fp".into(), entries).unwrap();
        let config = TrainConfig {
            learning_rate: 0.5,
            epochs: 100,
            batch_size: 8,
            seed: 1,
            validation_fraction: 0.2,
        };
        let (_, log) = retrain_head(&cache, &labels, 2, &config).unwrap();
        let last = log.entries().last().unwrap();
        assert_eq!(last.train_accuracy, 1.0);
    }

    #[test]
    fn evaluate_head_scores_accuracy_and_loss() {
        // weights that map feature sign to class: x > 0 -> class 0
        let head = DenseParams::new(2, 1, vec![5.0, -5.0], vec![0.0, 0.0]).unwrap();
        let features = vec![vec![1.0], vec![-1.0], vec![2.0], vec![-0.5]];
        let labels = [0, 1, 0, 0];
        let (accuracy, ce) = evaluate_head(&head, &features, &labels).unwrap();
        assert_eq!(accuracy, 0.75);
        assert!(ce > 0.0 && ce.is_finite());

        assert!(evaluate_head(&head, &[], &[]).is_err());
        assert!(evaluate_head(&head, &features, &[0, 1]).is_err());
        assert!(evaluate_head(&head, &features, &[0, 1, 2, 0]).is_err());
    }

    #[test]
    fn label_out_of_range_is_data_error() {
        let cache = BottleneckCache::new(
            "fp".into(),
            vec![("a".into(), vec![0.0]), ("b".into(), vec![1.0])],
        )
        .unwrap();
        let err = retrain_head(&cache, &[0, 2], 2, &TrainConfig::default());
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn labels_align_by_id_not_position() {
        let net = tiny_net();
        let ds = synth_shapes(2, 16, 8).unwrap();
        let cache = extract_bottlenecks(&net, &ds).unwrap();
        assert_eq!(labels_for_cache(&cache, &ds).unwrap(), ds.labels());

        // a cache over different images is rejected
        let other = synth_shapes(3, 16, 8).unwrap();
        assert!(labels_for_cache(&cache, &other).is_err());
    }

    #[test]
    fn cache_file_roundtrip_is_exact() {
        let net = tiny_net();
        let ds = synth_shapes(2, 16, 9).unwrap();
        let cache = extract_bottlenecks(&net, &ds).unwrap();
        let text = cache_to_string(&cache);
        let parsed = cache_from_string(&text).unwrap();
        assert_eq!(parsed, cache);
        assert_eq!(cache_to_string(&parsed), text);
    }

    #[test]
    fn truncated_cache_file_is_rejected() {
        let net = tiny_net();
        let ds = synth_shapes(1, 16, 9).unwrap();
        let cache = extract_bottlenecks(&net, &ds).unwrap();
        let text = cache_to_string(&cache);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        assert!(cache_from_string(&lines.join("\n")).is_err());
    }
}
