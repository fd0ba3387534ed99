//! `weakpu` command-line interface.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data error,
//! 3 runtime error. Every failure prints one line to stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weakpu::io::FileFormat;

mod commands;
mod config_file;

#[derive(Debug, Parser)]
#[command(name = "weakpu", version, about = "Positive-unlabeled defect detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated positive-labeled fractions for `experiment`.
    #[arg(long, global = true, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,

    /// Ground-truth class used as the positive-labeled class.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(0..=1))]
    positive_class: Option<u8>,

    #[arg(long, global = true)]
    folds: Option<usize>,

    /// Output directory; created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for forest building and sweeps. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Format of feature files written by `synth` and `split`.
    #[arg(long, global = true)]
    format: Option<FileFormat>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset.
    Synth {
        /// `blobs` or `anomalies`.
        #[arg(long, default_value = "blobs")]
        kind: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long)]
        outliers: Option<usize>,
    },
    /// Hide labels: keep a fraction of one class as positives, the rest unlabeled.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Fit the isolation forest on the positives of a PU file.
    FitForest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Rank the unlabeled rows of a PU file by anomaly score.
    Score {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Keep the top-k ranked rows as counter-examples.
    Mine {
        #[arg(long)]
        ranked: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        k: i64,
    },
    /// Train the classifier on positives plus mined counter-examples.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mined: PathBuf,
    },
    /// Predict with a trained model; scores against labels when available.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// `unlabeled_index,label` file from `split`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Supervised baseline plus one weak cross-validation per fraction.
    Experiment {
        /// Use a built-in synthetic dataset: `blobs` or `anomalies`.
        #[arg(long)]
        synth: Option<String>,
        /// Labeled feature file.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: 1,
            msg: msg.into(),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            msg: msg.into(),
        }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError {
            code: 3,
            msg: msg.into(),
        }
    }
}

impl From<weakpu::Error> for CliError {
    fn from(e: weakpu::Error) -> Self {
        use weakpu::Error as E;
        let code = match e.root() {
            E::Config(_) | E::Argument(_) => 1,
            E::Stratification { .. } | E::InsufficientData { .. } | E::TrainingData(_) => 2,
            _ if e.is_data_error() => 2,
            _ => 3,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("usage error"));
            return ExitCode::from(1);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg.replace('\n', " "));
            ExitCode::from(e.code)
        }
    }
}
