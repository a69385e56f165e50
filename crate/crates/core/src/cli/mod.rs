//! Command-line interface. Exit codes: 0 success, 1 runtime or pipeline
//! failure, 2 configuration error.

mod commands;
mod config;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use report::{
    match_pairs, split_rate, AccuracyRow, CdRow, EvalReport, ObjectCd, ObjectSymmetry, PairMatch, SweepRow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "symcomplete", version, about = "Training-free completion of mirror-symmetric point clouds")]
pub struct Cli {
    /// Worker threads for batch work; 0 uses all cores.
    #[arg(long, global = true, env = "SYMCOMPLETE_JOBS")]
    pub jobs: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete a cloud, or every cloud in a directory.
    Complete(CompleteArgs),
    /// Print symmetry plane candidates, their scores and the selected plane.
    DetectPlane(DetectArgs),
    /// Write damaged copies of every cloud in a directory.
    Augment(AugmentArgs),
    /// Compare predictions against ground truth.
    Eval(EvalArgs),
    /// Mean Chamfer distance to ground truth as a function of the skip threshold.
    SweepThreshold(SweepArgs),
}

/// Pipeline settings shared by several commands. Flags override the config
/// file.
#[derive(Debug, Clone, Default, Args)]
pub struct TuningArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for registration sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scaled Chamfer threshold d*; 0 always skips.
    #[arg(long)]
    pub skip_threshold: Option<f64>,
    /// Disable skip validation.
    #[arg(long)]
    pub no_skip: bool,
    /// Detect-and-fill rounds.
    #[arg(long)]
    pub passes: Option<usize>,
    /// Balance threshold.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Absolute cube side; defaults to a multiple of the point spacing.
    #[arg(long)]
    pub cube_side: Option<f64>,
    /// Neighbors per normal fit.
    #[arg(long)]
    pub neighbors: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Input cloud file or directory.
    pub input: PathBuf,
    /// Output cloud file, or directory when the input is one.
    pub output: PathBuf,
    /// Write diagnostics JSON here (a directory in batch mode).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// Write ASCII PLY instead of binary.
    #[arg(long)]
    pub ascii: bool,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input cloud file.
    pub input: PathBuf,
    /// Score the candidates without registration refinement.
    #[arg(long)]
    pub candidates_only: bool,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Directory of clean clouds.
    pub input_dir: PathBuf,
    /// Directory for damaged clouds, sidecars and the manifest.
    pub output_dir: PathBuf,
    /// Damage rates as fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45])]
    pub rates: Vec<f64>,
    /// Master seed; per-file seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions: clouds, or plane JSON with --symmetry.
    pub pred_dir: PathBuf,
    /// Ground truth: clouds, or plane JSON with --symmetry.
    pub gt_dir: PathBuf,
    /// Aggregate table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Per-object rows as CSV.
    #[arg(long)]
    pub objects_csv: Option<PathBuf>,
    /// Full report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Evaluate matched files even when some are unmatched.
    #[arg(long)]
    pub allow_partial: bool,
    /// Compare predicted planes with ground-truth planes instead of clouds.
    #[arg(long)]
    pub symmetry: bool,
    /// Angle threshold in radians.
    #[arg(long, default_value_t = 0.2)]
    pub theta: f64,
    /// Center threshold as a fraction of the bounding-box diagonal.
    #[arg(long, default_value_t = 0.05)]
    pub tau_fraction: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Damaged clouds, named `<stem>_drNN`.
    pub damaged_dir: PathBuf,
    /// Clean clouds, named `<stem>`.
    pub gt_dir: PathBuf,
    /// Explicit thresholds; `inf` is accepted.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["from", "to", "step"])]
    pub values: Option<Vec<f64>>,
    /// First threshold of the range.
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    /// Last threshold of the range, inclusive.
    #[arg(long, default_value_t = 6.0)]
    pub to: f64,
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<i32> {
    let tuning = match &cli.command {
        Command::Complete(a) => Some(&a.tuning),
        Command::DetectPlane(a) => Some(&a.tuning),
        Command::SweepThreshold(a) => Some(&a.tuning),
        Command::Augment(_) | Command::Eval(_) => None,
    };
    let run_cfg = RunConfig::resolve(tuning.cloned().unwrap_or_default(), cli.jobs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run_cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Complete(a) => commands::complete(a, &run_cfg),
        Command::DetectPlane(a) => commands::detect_plane(a, &run_cfg),
        Command::Augment(a) => commands::augment(a),
        Command::Eval(a) => commands::eval(a),
        Command::SweepThreshold(a) => commands::sweep_threshold(a, &run_cfg),
    })
}
