//! Batch front end. Every command reads cohort files, writes report files
//! into `--out` and a `manifest.json` listing inputs and outputs with their
//! digests.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input (including a
//! failed cohort validation, whose report is printed on stderr).

mod commands;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::growth::{GrowthDenominator, TimeNormalization};
use crate::io::ReportFormat;
use crate::metrics::Orientation;
use crate::model::ValidationReport;
use crate::subgroup::{Axis, DiameterSource};

pub use manifest::{sha256_file, FileDigest, ReportManifest, RunContext, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(
    name = "cadeval",
    version,
    about = "Evaluation and fusion of nodule detection and malignancy models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Cohort files. `--cohort DIR` picks the standard file names inside DIR;
/// the other flags override single files.
#[derive(Debug, Clone, Default, Args)]
pub struct Inputs {
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Detections file; `compare` takes it twice.
    #[arg(long = "pred")]
    pub pred: Vec<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub patients: Option<PathBuf>,
    #[arg(long)]
    pub scans: Option<PathBuf>,
    /// Directory of `.vmask` files named after `mask_ref`.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub readers: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "structured")]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct Boot {
    /// Bootstrap replicates; 0 disables confidence intervals.
    #[arg(long, default_value_t = 0)]
    pub boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to CADEVAL_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Patient,
    Nodule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Malignant,
    Benign,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairBy {
    Bbox,
    Mask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Auc,
    Cpm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    V1,
    V2,
}

/// Options shared by the detection-pairing commands.
#[derive(Debug, Clone, Args)]
pub struct PairingArgs {
    #[arg(long, value_enum, default_value = "malignant")]
    pub target: Target,
    /// Restrict to scans of this timepoint (-1 latest, -2 prior).
    #[arg(long, allow_hyphen_values = true)]
    pub timepoint: Option<i32>,
    #[arg(long, default_value_t = crate::matching::DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    #[arg(long, value_enum, default_value = "bbox")]
    pub pair_by: PairBy,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check keys and record invariants; prints the validation report.
    Validate {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// ROC curve, AUC and maximum-Youden operating point.
    Roc {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        output: Output,
        #[command(flatten)]
        boot: Boot,
        /// Patient level needs patients and scans; defaults to it when given.
        #[arg(long, value_enum)]
        level: Option<Level>,
        #[arg(long, allow_hyphen_values = true)]
        timepoint: Option<i32>,
        #[arg(long, default_value = "as_is")]
        orientation: Orientation,
        #[arg(long, default_value_t = crate::matching::DEFAULT_IOU_THRESHOLD)]
        iou: f64,
        /// Also write an SVG plot.
        #[arg(long)]
        plot: bool,
    },
    /// FROC curve with sensitivities at the requested FP/scan.
    Froc {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        output: Output,
        #[command(flatten)]
        boot: Boot,
        #[command(flatten)]
        pairing: PairingArgs,
        /// FP/scan operating points; defaults to the CPM thresholds.
        #[arg(long)]
        fp: Vec<f64>,
        #[arg(long)]
        plot: bool,
    },
    /// Competition performance metric.
    Cpm {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        output: Output,
        #[command(flatten)]
        boot: Boot,
        #[command(flatten)]
        pairing: PairingArgs,
    },
    /// One-sided superiority test of the first `--pred` over the second on
    /// shared bootstrap resamples.
    Compare {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        output: Output,
        #[command(flatten)]
        boot: Boot,
        #[arg(long, value_enum, default_value = "auc")]
        metric: Metric,
        #[arg(long, value_enum)]
        level: Option<Level>,
        #[command(flatten)]
        pairing: PairingArgs,
    },
    /// Growth measures of linked nodules and their ROC suite.
    Growth {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value = "latest")]
        denominator: GrowthDenominator,
        #[arg(long, default_value = "raw")]
        normalization: TimeNormalization,
        /// Keep only NODCAT III nodules growing by at least 25%.
        #[arg(long)]
        nelson_select: bool,
        #[arg(long, default_value_t = crate::matching::DEFAULT_IOU_THRESHOLD)]
        iou: f64,
    },
    /// Stacking of prediction classes.
    #[command(subcommand)]
    Ensemble(EnsembleCommand),
    /// Logistic calibration of a score column.
    #[command(subcommand)]
    Calibrate(CalibrateCommand),
    /// Merge overlapping segmented detections.
    Dedup {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        output: Output,
        /// Lower end of the closed diameter window, in mm.
        #[arg(long)]
        min_mm: Option<f64>,
        /// Upper end of the closed diameter window, in mm.
        #[arg(long)]
        max_mm: Option<f64>,
    },
    /// Long-axis, short-axis and mean diameter of mask files.
    Measure {
        #[arg(long = "mask", required = true)]
        masks: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "v1")]
        method: Method,
        #[command(flatten)]
        output: Output,
    },
    /// Patient subgroups along one axis, with per-group AUC.
    Subgroup {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        output: Output,
        #[arg(long)]
        axis: Axis,
        /// JSON stratifier configuration replacing the shipped bins.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "gt")]
        diameter_source: DiameterSource,
        #[arg(long, allow_hyphen_values = true)]
        timepoint: Option<i32>,
    },
    /// Generate a synthetic cohort.
    Synth {
        /// JSON generator specification; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Overrides the seed of the specification.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Pooled ROC of the reader annotations.
    Readers {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        output: Output,
        #[arg(long)]
        plot: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum EnsembleCommand {
    /// Fit stacking weights on a tuning table.
    Fit {
        /// Comma-separated column prefixes; each prefix is one class whose
        /// prediction is the mean of its columns (`3d:,2d:,xgb:`).
        #[arg(long)]
        classes: String,
        /// Prediction rows with labels.
        #[arg(long)]
        tune: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Combine prediction rows with fitted weights.
    Apply {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Subcommand)]
pub enum CalibrateCommand {
    /// Fit calibration parameters on labeled rows.
    Fit {
        #[arg(long)]
        tune: PathBuf,
        #[arg(long, default_value = "score")]
        column: String,
        /// Fit the slope only, keeping the intercept at 0.
        #[arg(long)]
        temperature: bool,
        #[arg(long, default_value_t = crate::stats::DEFAULT_ECE_BINS)]
        bins: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Apply fitted parameters to a score column.
    Apply {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "score")]
        column: String,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug)]
pub enum CliError {
    Validation(ValidationReport),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Json(_) => 1,
        _ => 2,
    }
}

/// Parse `argv` (program name first), run the command and return the
/// process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::execute(cli.command, argv) {
        Ok(()) => 0,
        Err(CliError::Validation(report)) => {
            eprintln!("validation failed with {} violation(s):", report.violations.len());
            eprint!("{report}");
            2
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
