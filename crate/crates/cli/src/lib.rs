//! Batch pipeline behind the `cmlm` binary: factor-model moment estimation,
//! per-account risk-aversion inference, panel regressions, plot data and
//! synthetic datasets.

pub mod artifact;
pub mod estimate;
pub mod infer;
pub mod labels;
pub mod models;
pub mod plotdata;
pub mod regress;
pub mod svg;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cmlm::factor_model::MIN_OBSERVATIONS;
use cmlm::ingest::IngestError;
use cmlm::synth::{self, SynthConfig, SynthError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable capping the worker count (0 = one per core).
pub const THREADS_ENV: &str = "CMLM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Data(e.to_string())
    }
}

pub(crate) fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

#[derive(Parser, Debug)]
#[command(name = "cmlm", version, about = "Capital-market-line risk aversion pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rolling five-factor moment snapshots, one per month
    Estimate(EstimateArgs),
    /// Implied risk aversion and efficiency per account-month
    Infer(InferArgs),
    /// Panel regression of a registered model
    Regress(RegressArgs),
    /// Histogram or scatter data for plotting
    Plotdata(PlotdataArgs),
    /// Write a synthetic dataset
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    pub factors: PathBuf,
    #[arg(long)]
    pub returns: PathBuf,
    /// Months of history per snapshot
    #[arg(long)]
    pub window: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// File listing the market assets (`asset_id` header); defaults to all
    #[arg(long)]
    pub market: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub moments: PathBuf,
    #[arg(long)]
    pub positions: PathBuf,
    /// `factors` for the snapshot's mean risk-free rate, or a fixed rate
    #[arg(long, default_value = "factors")]
    pub rf_source: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RegressArgs {
    /// Output of `infer`
    #[arg(long)]
    pub profiles: PathBuf,
    /// Household profile file
    #[arg(long)]
    pub demographics: PathBuf,
    #[arg(long)]
    pub vix: PathBuf,
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Positions file; needed for holding counts and account ownership
    #[arg(long)]
    pub positions: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotdataArgs {
    /// Output of `infer`
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub by: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Household profile file, required for categorical groupings
    #[arg(long)]
    pub demographics: Option<PathBuf>,
    /// Positions file for account ownership
    #[arg(long)]
    pub positions: Option<PathBuf>,
    /// `theta` or `efficiency`
    #[arg(long, default_value = "theta")]
    pub metric: String,
    #[arg(long, default_value_t = plotdata::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Worker count from `CMLM_THREADS`; `None` when unset.
pub fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let threads = thread_count()?.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Estimate(a) => estimate::run(&a),
        Command::Infer(a) => infer::run(&a),
        Command::Regress(a) => regress::run(&a),
        Command::Plotdata(a) => plotdata::run(&a),
        Command::Synth(a) => run_synth(&a),
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn check_window(window: usize) -> Result<(), CliError> {
    if window < MIN_OBSERVATIONS {
        return Err(CliError::Usage(format!(
            "--window must be at least {MIN_OBSERVATIONS} months, got {window}"
        )));
    }
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<(), CliError> {
    let config = SynthConfig::parse(&read_text(&args.config)?)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let data = synth::generate(&config)?;
    synth::write_dataset(&data, &args.out)?;
    log::info!(
        "wrote {} households, {} funds, {} position rows to {}",
        data.households.profiles.len(),
        data.funds.len(),
        data.households.positions.len(),
        args.out.display()
    );
    Ok(())
}
