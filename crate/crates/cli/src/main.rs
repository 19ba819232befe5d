//! `tensor-da`: generate synthetic shifts, pool features, fit adaptation
//! models and evaluate them, with JSON reports.

mod commands;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tensorda::data_io::ShiftKind;
use tensorda::method::Method;

use crate::error::{CliError, EXIT_OK, EXIT_WARNINGS};

#[derive(Debug, Parser)]
#[command(
    name = "tensor-da",
    version,
    about = "Tensor-subspace unsupervised domain adaptation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic source/target pair with a known mode-wise shift.
    Synth(SynthArgs),
    /// Fit an adaptation model and write it with a report.
    Fit(FitArgs),
    /// Train on transformed source features and evaluate on the target.
    Eval(EvalArgs),
    /// Max-pool the two spatial modes of every sample to a fixed grid.
    Pool(PoolArgs),
    /// Dump a tensor file as text.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Exit with code 4 when the run produced warnings.
    #[arg(long)]
    strict: bool,
    /// Record per-phase wall times in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 8)]
    per_class: usize,
    /// Target samples per class; defaults to --per-class.
    #[arg(long)]
    target_per_class: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "6,6,32")]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "3,3,8")]
    true_dims: Vec<usize>,
    #[arg(long, default_value = "mode_rotation")]
    kind: ShiftKind,
    /// Half the principal angle of each mode's subspace tilt, in radians.
    #[arg(long, default_value_t = 0.5)]
    angle: f64,
    /// Additive noise standard deviation.
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Per-sample spread around the class cores.
    #[arg(long, default_value_t = 1.0)]
    within_sigma: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value = "taisl")]
    method: Method,
    /// Subspace dims per mode; defaults to 6,6,128 capped at each mode size.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1e-5)]
    lambda: f64,
    /// Maximum outer iterations.
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Relative loss change that ends the outer loop.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model output path.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Fitted models to evaluate; the raw-feature baseline is always added.
    #[arg(long)]
    model: Vec<PathBuf>,
    /// Ridge penalty of the classifiers.
    #[arg(long, default_value_t = 1.0)]
    ridge: f64,
    /// Cross-validation folds of the A-distance.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct PoolArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 6)]
    out_h: usize,
    #[arg(long, default_value_t = 6)]
    out_w: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    input: PathBuf,
    /// Text output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("TENSOR_DA_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("TENSOR_DA_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {threads} threads: {e}")))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    let (warnings, common) = match cli.command {
        Command::Synth(a) => (commands::synth(&a)?, a.common),
        Command::Fit(a) => (commands::fit(&a)?, a.common),
        Command::Eval(a) => (commands::eval(&a)?, a.common),
        Command::Pool(a) => (commands::pool(&a)?, a.common),
        Command::Export(a) => {
            commands::export(&a)?;
            return Ok(EXIT_OK);
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(if common.strict && !warnings.is_empty() {
        EXIT_WARNINGS
    } else {
        EXIT_OK
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
