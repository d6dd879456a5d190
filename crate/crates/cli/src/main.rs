//! `hipmetrics` command-line tool.

mod commands;
mod error;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hipmetrics", version, about = "Hip radiograph landmark measurement, DDH scoring and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Dataset file, study document, or directory of study documents.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output file (or directory for `render`); stdout when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Scoring parameters (TOML); defaults to the standard 5-point rule.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// OKS falloff constants (TOML); defaults to the bundled table.
    #[arg(long, global = true)]
    pub kconst: Option<PathBuf>,
    /// OKS thresholds as `start:step:stop` or a comma-separated list.
    #[arg(long, global = true)]
    pub thresholds: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Skip studies with degenerate geometry instead of failing.
    #[arg(long, global = true)]
    pub lenient: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Delimiter-separated table.
    Table,
    /// `key = value` summary.
    Report,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Angles and Crowe ratio per hip.
    Measure,
    /// Scored diagnosis per hip.
    Diagnose {
        /// Also write an SVG overlay per study into this directory.
        #[arg(long)]
        render: Option<PathBuf>,
    },
    /// Grid-search scoring parameters against ground-truth labels.
    Fit {
        /// Write the fitted parameters as TOML.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Keypoint mAP/mAR of detections against the input ground truth.
    EvalKeypoints {
        #[arg(long)]
        detections: PathBuf,
    },
    /// ICC and Bland-Altman agreement of the measured angles.
    EvalAngles {
        /// Second measurement source; without it the annotators of each study are compared.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Confusion matrix, F1 and kappa of rule verdicts against labels.
    EvalDiagnosis {
        /// Keypoints to diagnose; defaults to the input's own.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Estimate OKS constants from repeated annotations.
    Kconst {
        /// Write the constants as TOML.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Generate a synthetic labelled dataset.
    Synth {
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Probability of flipping each label.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Write an SVG overlay per study into `--output`.
    Render,
    /// Serve the HTTP API over the `--input` directory.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
