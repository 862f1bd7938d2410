//! Acceptance suite. Each test is one exit criterion and prints a PASS
//! line on success (run with `--nocapture` to see them); the test names
//! double as the criterion labels in cargo's output.

use convkit::augment::{
    adjust_lighting, augment_dataset, flip_horizontal, rotate, translate, AugmentSpec,
};
use convkit::dataset::{stratified_split, synth_shapes, SplitSpec};
use convkit::eval::{
    emit_report_json, macro_average, metrics_report, per_class_metrics, ConfusionMatrix,
};
use convkit::image::BLACK;
use convkit::nn::{
    grad_check, pool_forward, ConvParams, DenseParams, LayerSpec, Network, PoolSpec, Volume,
};
use convkit::rng::SplitMix64;
use convkit::train::{train_full, TrainConfig};
use convkit::transfer::{extract_bottlenecks, retrain_head};

/// Reference confusion matrix: five classes, 20 test images each.
/// Rows are actual classes in the order China, Germany, India, Jamaica,
/// Zimbabwe; entry [a][p] counts images of class a predicted as p.
const REFERENCE_COUNTS: [[u64; 5]; 5] = [
    [18, 1, 0, 1, 0],
    [0, 19, 1, 0, 0],
    [1, 0, 16, 1, 2],
    [0, 1, 0, 16, 3],
    [1, 1, 0, 3, 15],
];

const REFERENCE_NAMES: [&str; 5] = ["China", "Germany", "India", "Jamaica", "Zimbabwe"];

/// Reconstructs the 100 (actual, predicted) pairs behind the matrix.
fn reference_pairs() -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(100);
    for (a, row) in REFERENCE_COUNTS.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            for _ in 0..n {
                pairs.push((a, p));
            }
        }
    }
    pairs
}

fn reference_matrix() -> ConfusionMatrix {
    ConfusionMatrix::from_predictions(
        &reference_pairs(),
        REFERENCE_NAMES.iter().map(|s| s.to_string()).collect(),
    )
    .unwrap()
}

/// Exact rational equality: a/b == c/d over the integers.
fn ratio_eq(a: u64, b: u64, c: u64, d: u64) -> bool {
    (a as u128) * (d as u128) == (c as u128) * (b as u128)
}

#[test]
fn acceptance_1_per_class_and_macro_accuracy_exact() {
    let cm = reference_matrix();
    assert_eq!(cm.total(), 100);
    for a in 0..5 {
        assert_eq!(cm.row_sum(a), 20);
    }

    // zero-tolerance check in integer rational arithmetic
    let expected_percent = [96u64, 96, 95, 91, 90];
    let mut correct_sum = 0u64;
    for (c, &pct) in expected_percent.iter().enumerate() {
        let (tp, _, _, tn) = cm.tallies(c);
        assert!(
            ratio_eq(tp + tn, cm.total(), pct, 100),
            "class {c}: ({tp}+{tn})/{} != {pct}/100",
            cm.total()
        );
        correct_sum += tp + tn;
    }
    // macro accuracy: Σ(TP+TN) / (k·total) == 936/1000
    assert!(
        ratio_eq(correct_sum, 5 * cm.total(), 936, 1000),
        "macro accuracy {correct_sum}/{} != 936/1000",
        5 * cm.total()
    );

    // the floating pipeline projects onto the same values
    let metrics = per_class_metrics(&cm).unwrap();
    let accuracies: Vec<f64> = metrics.iter().map(|m| m.accuracy).collect();
    assert_eq!(accuracies, vec![0.96, 0.96, 0.95, 0.91, 0.90]);
    let macro_avg = macro_average(&metrics).unwrap();
    assert!((macro_avg.accuracy - 0.936).abs() < 1e-12);
    assert_eq!(format!("{:.6}", macro_avg.accuracy), "0.936000");
    let report = metrics_report(&cm).unwrap();
    assert!(emit_report_json(&report).contains("\"accuracy\": 0.936000"));

    println!("PASS acceptance_1: per-class accuracies 0.96/0.96/0.95/0.91/0.90 and macro 0.936, exact in rational arithmetic");
}

#[test]
fn acceptance_2_derived_metrics_match_brute_force_tally() {
    let cm = reference_matrix();
    let metrics = per_class_metrics(&cm).unwrap();
    let pairs = reference_pairs();
    assert_eq!(pairs.len(), 100);

    for (c, m) in metrics.iter().enumerate() {
        // independent tally straight off the pair list
        let tp = pairs.iter().filter(|&&(a, p)| a == c && p == c).count() as f64;
        let fp = pairs.iter().filter(|&&(a, p)| a != c && p == c).count() as f64;
        let fn_ = pairs.iter().filter(|&&(a, p)| a == c && p != c).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        assert!((m.precision - precision).abs() < 1e-12);
        assert!((m.recall - recall).abs() < 1e-12);
        assert!((m.f1 - f1).abs() < 1e-12);
    }

    // frozen four-decimal projections of the derived values
    let p4: Vec<f64> = metrics.iter().map(|m| (m.precision * 1e4).round() / 1e4).collect();
    let r4: Vec<f64> = metrics.iter().map(|m| (m.recall * 1e4).round() / 1e4).collect();
    let f4: Vec<f64> = metrics.iter().map(|m| (m.f1 * 1e4).round() / 1e4).collect();
    assert_eq!(p4, vec![0.9000, 0.8636, 0.9412, 0.7619, 0.7500]);
    assert_eq!(r4, vec![0.90, 0.95, 0.80, 0.80, 0.75]);
    assert_eq!(f4, vec![0.9000, 0.9048, 0.8649, 0.7805, 0.7500]);

    let macro_avg = macro_average(&metrics).unwrap();
    assert!((macro_avg.recall - 0.84).abs() < 1e-12);
    assert_eq!((macro_avg.precision * 1e4).round() / 1e4, 0.8433);

    println!("PASS acceptance_2: precision/recall/F1 from the matrix match a per-pair brute-force tally to 1e-12");
}

#[test]
fn acceptance_3_gradient_suite() {
    let start = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0usize;

    let mut run = |net: Network, input: Volume, target: Vec<f64>| {
        let err = grad_check(&net, &input, &target, 1e-5).unwrap();
        assert!(err < 1e-4, "instance {count}: relative error {err:e}");
        worst = worst.max(err);
        count += 1;
    };

    for i in 0..25u64 {
        // conv path
        let mut rng = SplitMix64::new(0xACC3_0000 + i);
        let in_c = 1 + rng.below(2);
        let (h, w) = (3 + rng.below(3), 3 + rng.below(3));
        let classes = 2 + rng.below(3);
        let conv = ConvParams::glorot(1 + rng.below(3), in_c, 1, 1, &mut rng);
        let dense = DenseParams::glorot(classes, conv.out_channels * h * w, &mut rng);
        let net = Network::new(
            (in_c, h, w),
            vec![
                LayerSpec::Conv(conv),
                LayerSpec::Flatten,
                LayerSpec::Dense(dense),
                LayerSpec::Softmax,
            ],
        )
        .unwrap();
        let input = random_volume(&mut rng, in_c, h, w);
        run(net, input, one_hot(rng.below(classes), classes));

        // pool path
        let mut rng = SplitMix64::new(0xACC3_1000 + i);
        let c = 1 + rng.below(2);
        let (h, w) = (4 + rng.below(3), 4 + rng.below(3));
        let classes = 2 + rng.below(3);
        let pool = PoolSpec::max(2, 1 + rng.below(2));
        let (oh, ow) = (pool.out_len(h), pool.out_len(w));
        let dense = DenseParams::glorot(classes, c * oh * ow, &mut rng);
        let net = Network::new(
            (c, h, w),
            vec![
                LayerSpec::Pool(pool),
                LayerSpec::Flatten,
                LayerSpec::Dense(dense),
                LayerSpec::Softmax,
            ],
        )
        .unwrap();
        let input = random_volume(&mut rng, c, h, w);
        run(net, input, one_hot(rng.below(classes), classes));

        // dense path
        let mut rng = SplitMix64::new(0xACC3_2000 + i);
        let n = 2 + rng.below(7);
        let classes = 2 + rng.below(3);
        let dense = DenseParams::glorot(classes, n, &mut rng);
        let net = Network::new(
            (n, 1, 1),
            vec![LayerSpec::Dense(dense), LayerSpec::Softmax],
        )
        .unwrap();
        let input = random_volume(&mut rng, n, 1, 1);
        run(net, input, one_hot(rng.below(classes), classes));

        // full conv/relu/pool/dense path
        let mut rng = SplitMix64::new(0xACC3_3000 + i);
        let in_c = 1 + rng.below(2);
        let (h, w) = (5 + rng.below(2), 5 + rng.below(2));
        let classes = 2 + rng.below(4);
        let conv = ConvParams::glorot(2, in_c, 1, 1, &mut rng);
        let pool = PoolSpec::max(2, 2);
        let (oh, ow) = (pool.out_len(h), pool.out_len(w));
        let dense = DenseParams::glorot(classes, 2 * oh * ow, &mut rng);
        let net = Network::new(
            (in_c, h, w),
            vec![
                LayerSpec::Conv(conv),
                LayerSpec::Relu,
                LayerSpec::Pool(pool),
                LayerSpec::Flatten,
                LayerSpec::Dense(dense),
                LayerSpec::Softmax,
            ],
        )
        .unwrap();
        let input = random_volume(&mut rng, in_c, h, w);
        run(net, input, one_hot(rng.below(classes), classes));
    }

    assert!(count >= 100);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "gradient suite took {elapsed:?}");
    println!(
        "PASS acceptance_3: {count} instances, worst relative error {worst:e} < 1e-4 in {elapsed:?}"
    );
}

#[test]
fn acceptance_4_pool_shape_law() {
    let mut rng = SplitMix64::new(0x5AFE);
    let mut checked = 0usize;
    for _ in 0..2000 {
        let input = 1 + rng.below(64);
        let extent = 1 + rng.below(input);
        let stride = 1 + rng.below(8);
        let volume = Volume::zeros(1, input, input);
        let (out, _) = pool_forward(&volume, &PoolSpec::max(extent, stride)).unwrap();
        let expect = (input - extent) / stride + 1;
        assert_eq!(out.dims(), (1, expect, expect), "in={input} F={extent} S={stride}");
        checked += 1;
    }
    println!("PASS acceptance_4: pool output dims equal floor((in-F)/S)+1 on {checked} sampled (in<=64, F<=in, S<=8) triples");
}

#[test]
fn acceptance_5_augmentation_count_and_identities() {
    let ds = synth_shapes(120, 32, 42).unwrap();
    assert_eq!(ds.len(), 600);
    let out = augment_dataset(&ds, &AugmentSpec::default(), 42).unwrap();
    assert_eq!(out.len(), 3600);

    let small = synth_shapes(3, 16, 9).unwrap();
    let expanded = augment_dataset(&small, &AugmentSpec::default(), 1).unwrap();
    assert_eq!(expanded.len(), 6 * small.len());

    for item in small.items() {
        let img = &item.image;
        assert_eq!(&flip_horizontal(&flip_horizontal(img)), img);
        assert_eq!(&rotate(img, 0.0, BLACK), img);
        assert_eq!(&adjust_lighting(img, 1.0).unwrap(), img);
        assert_eq!(&translate(img, 0, 0, BLACK).unwrap(), img);
    }

    println!("PASS acceptance_5: 600 -> 3600 (6N exactly); flip involution and rotate(0)/lighting(1)/translate(0,0) identities hold bitwise");
}

#[test]
fn acceptance_6_desk_scale_training_and_transfer() {
    let start = std::time::Instant::now();

    // base training: synthetic shapes, 120 per class, 32x32, seed 42
    let ds = synth_shapes(120, 32, 42).unwrap();
    let (train, val) = stratified_split(&ds, &SplitSpec::new(0.2, 42)).unwrap();
    let net = Network::small_cnn((3, 32, 32), 5, 42).unwrap();
    let config = TrainConfig::default(); // lr 0.01, 50 epochs, batch 32, seed 42
    let (_, log) = train_full(&net, &train, &val, &config).unwrap();

    let best_epoch = log
        .entries()
        .iter()
        .position(|e| e.train_accuracy >= 0.95)
        .map(|i| i + 1);
    assert!(
        best_epoch.is_some(),
        "train accuracy never reached 0.95 in {} epochs",
        log.len()
    );
    let first_ce = log.entries().first().unwrap().train_cross_entropy;
    let final_ce = log.entries().last().unwrap().train_cross_entropy;
    assert!(final_ce < first_ce);

    // transfer: base trained on three classes, head retrained on all five
    let base_ds = ds.select_classes(&["circle", "plus", "square"]).unwrap();
    let (base_train, base_val) = stratified_split(&base_ds, &SplitSpec::new(0.2, 42)).unwrap();
    let base_net = Network::small_cnn((3, 32, 32), 3, 42).unwrap();
    let base_config = TrainConfig {
        learning_rate: 0.05,
        epochs: 20,
        ..TrainConfig::default()
    };
    let (base_trained, _) = train_full(&base_net, &base_train, &base_val, &base_config).unwrap();

    let cache = extract_bottlenecks(&base_trained, &ds).unwrap();
    let head_config = TrainConfig {
        learning_rate: 0.1,
        epochs: 50,
        ..TrainConfig::default()
    };
    let (_, head_log) = retrain_head(&cache, &ds.labels(), 5, &head_config).unwrap();
    let val_accuracy = head_log.entries().last().unwrap().validation_accuracy;
    assert!(
        val_accuracy >= 0.80,
        "transfer validation accuracy {val_accuracy} below 0.80"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "desk-scale run took {elapsed:?}");
    println!(
        "PASS acceptance_6: base reached 0.95 train accuracy at epoch {} (ce {:.4} -> {:.4}); transfer validation accuracy {:.4} >= 0.80; {elapsed:?}",
        best_epoch.unwrap(),
        first_ce,
        final_ce,
        val_accuracy
    );
}

#[test]
fn acceptance_8_freeze_contract() {
    let ds = synth_shapes(10, 16, 5).unwrap();
    let base_ds = ds.select_classes(&["circle", "square", "triangle"]).unwrap();
    let (base_train, base_val) = stratified_split(&base_ds, &SplitSpec::new(0.25, 5)).unwrap();
    let net = Network::small_cnn((3, 16, 16), 3, 5).unwrap();
    let config = TrainConfig {
        learning_rate: 0.05,
        epochs: 3,
        batch_size: 16,
        seed: 5,
        validation_fraction: 0.2,
    };
    let (base_trained, _) = train_full(&net, &base_train, &base_val, &config).unwrap();

    let hash_before = base_trained.prefix_sha256().unwrap();
    let cache = extract_bottlenecks(&base_trained, &ds).unwrap();
    let (head, _) = retrain_head(&cache, &ds.labels(), 5, &config).unwrap();
    let transferred = base_trained.replace_head(head).unwrap();
    let hash_after_base = base_trained.prefix_sha256().unwrap();
    let hash_after_transfer = transferred.prefix_sha256().unwrap();

    assert_eq!(hash_before, hash_after_base);
    assert_eq!(hash_before, hash_after_transfer);
    println!(
        "PASS acceptance_8: feature-extractor SHA-256 unchanged by head retraining ({})",
        &hash_before[..16]
    );
}

fn random_volume(rng: &mut SplitMix64, c: usize, h: usize, w: usize) -> Volume {
    let data = (0..c * h * w).map(|_| rng.uniform(-1.0, 1.0)).collect();
    Volume::new(c, h, w, data).unwrap()
}

fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut t = vec![0.0; classes];
    t[label] = 1.0;
    t
}
