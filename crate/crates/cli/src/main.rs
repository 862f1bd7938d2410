//! convkit: synthesize data, augment it, train a small CNN, retrain its
//! final layer on new classes, and evaluate with confusion-matrix
//! metrics.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use commands::{AugmentOptions, ReportSource, TrainOptions};
use config::FileConfig;
use convkit::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "convkit", version, about = "From-scratch CNN transfer-learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Learning rate (default 0.01)
    #[arg(long)]
    lr: Option<f64>,
    /// Number of epochs (default 50)
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size (default 32)
    #[arg(long)]
    batch: Option<usize>,
    /// Fraction held out for validation (default 0.2)
    #[arg(long)]
    test_fraction: Option<f64>,
    /// TOML config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

impl TrainArgs {
    fn options(&self, image_size: Option<usize>) -> TrainOptions {
        TrainOptions {
            seed: self.seed,
            lr: self.lr,
            epochs: self.epochs,
            batch: self.batch,
            test_fraction: self.test_fraction,
            image_size,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic five-class shapes dataset
    Synth {
        /// Images per class (default 120)
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        image_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Expand a dataset 6x: original, rotate +/-30, translate, lighting, flip
    Augment {
        /// Dataset root (directory per class)
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Rotation magnitude in degrees (default 30)
        #[arg(long)]
        rotation: Option<f64>,
        /// Maximum translation as a fraction of each dimension (default 0.1)
        #[arg(long)]
        translation_fraction: Option<f64>,
        /// Brightness factor (default 1.25)
        #[arg(long)]
        lighting: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the small CNN from scratch on a dataset
    TrainBase {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Square training image size (default 32)
        #[arg(long)]
        image_size: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Freeze a trained model's feature extractor and retrain its final layer
    Retrain {
        #[arg(long = "in")]
        input: PathBuf,
        /// Base model JSON to transfer from
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate a model on a dataset, or replay a confusion-matrix CSV
    Evaluate {
        /// Model JSON (requires --in)
        #[arg(long, requires = "input", conflicts_with = "matrix")]
        model: Option<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Confusion-matrix CSV to replay instead of running a model
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a report.json or confusion-matrix CSV as a table or JSON
    Report {
        #[arg(long, conflicts_with = "matrix")]
        report: Option<PathBuf>,
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Output format: table or json
        #[arg(long, default_value = "table")]
        format: String,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> convkit::Result<()> {
    match cli.command {
        Command::Synth {
            per_class,
            image_size,
            seed,
            out,
            config,
        } => {
            let file = FileConfig::load(config.as_deref())?;
            commands::run_synth(per_class, image_size, seed, &out, &file)
        }
        Command::Augment {
            input,
            out,
            seed,
            rotation,
            translation_fraction,
            lighting,
            config,
        } => {
            let file = FileConfig::load(config.as_deref())?;
            let opts = AugmentOptions {
                seed,
                rotation,
                translation_fraction,
                lighting,
            };
            commands::run_augment(&input, &out, &opts, &file)
        }
        Command::TrainBase {
            input,
            out,
            image_size,
            train,
        } => {
            let file = FileConfig::load(train.config.as_deref())?;
            commands::run_train_base(&input, &out, &train.options(image_size), &file)
        }
        Command::Retrain {
            input,
            model,
            out,
            train,
        } => {
            let file = FileConfig::load(train.config.as_deref())?;
            commands::run_retrain(&input, &model, &out, &train.options(None), &file)
        }
        Command::Evaluate {
            model,
            input,
            matrix,
            out,
        } => match (model, input, matrix) {
            (Some(model), Some(input), None) => commands::run_evaluate_model(&model, &input, &out),
            (None, None, Some(matrix)) => commands::run_evaluate_matrix(&matrix, &out),
            _ => Err(Error::usage(
                "evaluate needs either --model with --in, or --matrix",
            )),
        },
        Command::Report {
            report,
            matrix,
            format,
        } => match (report, matrix) {
            (Some(path), None) => commands::run_report(ReportSource::ReportJson(&path), &format),
            (None, Some(path)) => commands::run_report(ReportSource::MatrixCsv(&path), &format),
            _ => Err(Error::usage("report needs either --report or --matrix")),
        },
    }
}

fn main() {
    let code = match Cli::try_parse() {
        Ok(cli) => match run(cli) {
            Ok(()) => 0,
            Err(err) => {
                eprintln!("error: {err}");
                exit_code(&err)
            }
        },
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            print!("{err}");
            0
        }
        Err(err) => {
            eprintln!("{err}");
            1
        }
    };
    std::process::exit(code);
}
