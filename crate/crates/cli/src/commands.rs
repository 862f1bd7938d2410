//! Implementations of the pipeline subcommands.

use crate::config::FileConfig;
use convkit::augment::{augment_dataset_with_records, augment_manifest_csv, AugmentSpec};
use convkit::dataset::{
    ingest_directory, save_dataset, save_images, stratified_split, synth_shapes,
    write_file_atomic, Dataset, IngestReport, SplitSpec,
};
use convkit::eval::{
    emit_confusion_csv, emit_curves_csv, emit_report_json, emit_report_table, metrics_report,
    parse_confusion_csv, parse_report_json, ConfusionMatrix, MetricsReport,
};
use convkit::nn::{model_from_json, model_to_json, Network};
use convkit::train::{predict, train_full_observed, EpochStats, TrainConfig};
use convkit::transfer::{
    cache_from_string, cache_to_string, extract_bottlenecks, labels_for_cache,
    retrain_head_observed,
};
use convkit::{Error, Result};
use std::path::Path;

pub struct TrainOptions {
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub test_fraction: Option<f64>,
    pub image_size: Option<usize>,
}

fn resolve_train_config(opts: &TrainOptions, file: &FileConfig) -> TrainConfig {
    let defaults = TrainConfig::default();
    TrainConfig {
        learning_rate: opts.lr.or(file.lr).unwrap_or(defaults.learning_rate),
        epochs: opts.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        batch_size: opts.batch.or(file.batch).unwrap_or(defaults.batch_size),
        seed: opts.seed.or(file.seed).unwrap_or(defaults.seed),
        validation_fraction: opts
            .test_fraction
            .or(file.test_fraction)
            .unwrap_or(defaults.validation_fraction),
    }
}

fn resolve_image_size(opts: &TrainOptions, file: &FileConfig) -> usize {
    opts.image_size.or(file.image_size).unwrap_or(32)
}

/// Creates the output directory up front so path problems surface
/// before any expensive work starts.
fn prepare_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| Error::usage(format!("cannot create output directory {}: {e}", out.display())))
}

fn ingest_with_warnings(root: &Path) -> Result<Dataset> {
    let IngestReport { dataset, skipped } = ingest_directory(root)?;
    for skip in &skipped {
        eprintln!("[ingest] warning: skipped {}: {}", skip.path, skip.reason);
    }
    if !skipped.is_empty() {
        eprintln!("[ingest] skipped {} undecodable file(s)", skipped.len());
    }
    Ok(dataset)
}

fn epoch_line(tag: &str, epoch: usize, total: usize, stats: &EpochStats) {
    eprintln!(
        "[{tag}] epoch={epoch}/{total} train_acc={:.6} val_acc={:.6} train_ce={:.6} val_ce={:.6}",
        stats.train_accuracy,
        stats.validation_accuracy,
        stats.train_cross_entropy,
        stats.validation_cross_entropy
    );
}

pub fn run_synth(per_class: Option<usize>, image_size: Option<usize>, seed: Option<u64>, out: &Path, file: &FileConfig) -> Result<()> {
    prepare_out_dir(out)?;
    let per_class = per_class.or(file.per_class).unwrap_or(120);
    let side = image_size.or(file.image_size).unwrap_or(32);
    let seed = seed.or(file.seed).unwrap_or(42);
    let ds = synth_shapes(per_class, side, seed)?;
    save_dataset(&ds, out)?;
    eprintln!(
        "[synth] wrote {} images ({} classes x {per_class}) at {side}x{side} to {}",
        ds.len(),
        ds.class_names().len(),
        out.display()
    );
    Ok(())
}

pub struct AugmentOptions {
    pub seed: Option<u64>,
    pub rotation: Option<f64>,
    pub translation_fraction: Option<f64>,
    pub lighting: Option<f64>,
}

pub fn run_augment(input: &Path, out: &Path, opts: &AugmentOptions, file: &FileConfig) -> Result<()> {
    prepare_out_dir(out)?;
    let ds = ingest_with_warnings(input)?;
    let defaults = AugmentSpec::default();
    let spec = AugmentSpec {
        rotation_degrees: opts.rotation.or(file.rotation).unwrap_or(defaults.rotation_degrees),
        translation_fraction: opts
            .translation_fraction
            .or(file.translation_fraction)
            .unwrap_or(defaults.translation_fraction),
        lighting_factor: opts.lighting.or(file.lighting).unwrap_or(defaults.lighting_factor),
        fill: defaults.fill,
    };
    let seed = opts.seed.or(file.seed).unwrap_or(42);
    let (augmented, records) = augment_dataset_with_records(&ds, &spec, seed)?;
    save_images(&augmented, out)?;
    write_file_atomic(&out.join("manifest.csv"), augment_manifest_csv(&records).as_bytes())?;
    eprintln!(
        "[augment] expanded {} -> {} images into {}",
        ds.len(),
        augmented.len(),
        out.display()
    );
    Ok(())
}

pub fn run_train_base(input: &Path, out: &Path, opts: &TrainOptions, file: &FileConfig) -> Result<()> {
    prepare_out_dir(out)?;
    let config = resolve_train_config(opts, file);
    let size = resolve_image_size(opts, file);

    let ds = ingest_with_warnings(input)?.resize_all(size, size)?;
    let classes = ds.class_names().len();
    let (train, val) = stratified_split(
        &ds,
        &SplitSpec::new(config.validation_fraction, config.seed),
    )?;
    eprintln!(
        "[train-base] {} train / {} val images, {classes} classes, {size}x{size}",
        train.len(),
        val.len()
    );

    let net = Network::small_cnn((3, size, size), classes, config.seed)?;
    let total = config.epochs;
    let (trained, log) = train_full_observed(&net, &train, &val, &config, &mut |epoch, stats| {
        epoch_line("train-base", epoch, total, stats);
    })?;

    write_file_atomic(&out.join("model.json"), model_to_json(&trained).as_bytes())?;
    write_file_atomic(&out.join("curves.csv"), emit_curves_csv(&log)?.as_bytes())?;
    eprintln!(
        "[train-base] wrote {} and {}",
        out.join("model.json").display(),
        out.join("curves.csv").display()
    );
    Ok(())
}

pub fn run_retrain(
    input: &Path,
    model_path: &Path,
    out: &Path,
    opts: &TrainOptions,
    file: &FileConfig,
) -> Result<()> {
    prepare_out_dir(out)?;
    let config = resolve_train_config(opts, file);
    let model_text = std::fs::read_to_string(model_path)?;
    let base = model_from_json(&model_text)?;
    let (_, h, w) = base.input_shape();

    let ds = ingest_with_warnings(input)?.resize_all(w, h)?;
    let classes = ds.class_names().len();

    let prefix_before = base.prefix_sha256()?;
    eprintln!("[retrain] frozen prefix {prefix_before}");

    // reuse an existing cache when its fingerprint still matches the
    // frozen prefix; a stale one is a hard error, not a silent rebuild
    let cache_path = out.join("bottlenecks.cache");
    let cache = if cache_path.is_file() {
        let cache = cache_from_string(&std::fs::read_to_string(&cache_path)?)?;
        cache.verify_against(&base)?;
        eprintln!(
            "[retrain] reusing {} cached bottleneck vectors from {}",
            cache.len(),
            cache_path.display()
        );
        cache
    } else {
        let cache = extract_bottlenecks(&base, &ds)?;
        write_file_atomic(&cache_path, cache_to_string(&cache).as_bytes())?;
        eprintln!(
            "[retrain] cached {} bottleneck vectors of length {}",
            cache.len(),
            cache.vector_len()
        );
        cache
    };

    let labels = labels_for_cache(&cache, &ds)?;
    let total = config.epochs;
    let (head, log) = retrain_head_observed(&cache, &labels, classes, &config, &mut |epoch, stats| {
        epoch_line("retrain", epoch, total, stats);
    })?;
    let transferred = base.replace_head(head)?;

    let prefix_after = transferred.prefix_sha256()?;
    if prefix_after != prefix_before {
        return Err(Error::contract(
            "freeze contract violated: prefix fingerprint changed during retraining",
        ));
    }
    eprintln!("[retrain] prefix unchanged after retraining ({prefix_after})");

    write_file_atomic(&out.join("model.json"), model_to_json(&transferred).as_bytes())?;
    write_file_atomic(&out.join("curves.csv"), emit_curves_csv(&log)?.as_bytes())?;
    eprintln!(
        "[retrain] wrote {} and {}",
        out.join("model.json").display(),
        out.join("curves.csv").display()
    );
    Ok(())
}

fn write_report_files(out: &Path, cm: &ConfusionMatrix, report: &MetricsReport) -> Result<()> {
    write_file_atomic(&out.join("report.json"), emit_report_json(report).as_bytes())?;
    write_file_atomic(&out.join("report.txt"), emit_report_table(report).as_bytes())?;
    write_file_atomic(&out.join("confusion.csv"), emit_confusion_csv(cm).as_bytes())?;
    eprintln!(
        "[evaluate] macro accuracy {:.6} over {} examples; wrote report.json, report.txt, confusion.csv to {}",
        report.macro_avg.accuracy,
        report.total_examples,
        out.display()
    );
    Ok(())
}

pub fn run_evaluate_model(model_path: &Path, input: &Path, out: &Path) -> Result<()> {
    prepare_out_dir(out)?;
    let model_text = std::fs::read_to_string(model_path)?;
    let net = model_from_json(&model_text)?;
    let (_, h, w) = net.input_shape();
    let ds = ingest_with_warnings(input)?.resize_all(w, h)?;
    if ds.class_names().len() != net.class_count() {
        return Err(Error::data(format!(
            "dataset has {} classes but the model predicts {}",
            ds.class_names().len(),
            net.class_count()
        )));
    }
    let pairs = predict(&net, &ds)?;
    let cm = ConfusionMatrix::from_predictions(&pairs, ds.class_names().to_vec())?;
    let report = metrics_report(&cm)?;
    write_report_files(out, &cm, &report)
}

pub fn run_evaluate_matrix(matrix_path: &Path, out: &Path) -> Result<()> {
    prepare_out_dir(out)?;
    let text = std::fs::read_to_string(matrix_path)?;
    let cm = parse_confusion_csv(&text)?;
    let report = metrics_report(&cm)?;
    write_report_files(out, &cm, &report)
}

pub enum ReportSource<'a> {
    ReportJson(&'a Path),
    MatrixCsv(&'a Path),
}

pub fn run_report(source: ReportSource<'_>, format: &str) -> Result<()> {
    let report = match source {
        ReportSource::ReportJson(path) => parse_report_json(&std::fs::read_to_string(path)?)?,
        ReportSource::MatrixCsv(path) => {
            let cm = parse_confusion_csv(&std::fs::read_to_string(path)?)?;
            metrics_report(&cm)?
        }
    };
    match format {
        "table" => print!("{}", emit_report_table(&report)),
        "json" => print!("{}", emit_report_json(&report)),
        other => return Err(Error::usage(format!("unknown format {other:?}, use table or json"))),
    }
    Ok(())
}
