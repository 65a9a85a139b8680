mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "qocnn", version, about = "Simulated quantum optical neural networks on MNIST")]
struct Cli {
    /// File of `key = value` lines; flags override it, it overrides defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write its checkpoint, history and run log.
    Train(Box<TrainArgs>),
    /// Score a checkpoint on the test set and write metric tables.
    Evaluate(EvaluateArgs),
    /// Finite-difference check of every layer in tiny models.
    Gradcheck(GradcheckArgs),
    /// Classical vs quantum operation, parameter and qubit counts.
    Estimate(EstimateArgs),
    /// Dump layer summaries and normalized SVD factors of a checkpoint.
    Export(ExportArgs),
}

#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    /// onn, qonn or qocnn.
    #[arg(long)]
    pub arch: Option<String>,
    /// Width of the hidden complex layer.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Sinusoid frequency (default 0.2).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub conv_k: Option<usize>,
    #[arg(long)]
    pub conv_s: Option<usize>,
    #[arg(long)]
    pub pool_w: Option<usize>,
    #[arg(long)]
    pub pool_p: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct TestDataArgs {
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Use only the first N test images.
    #[arg(long)]
    pub test_limit: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    /// Use only the first N training images.
    #[arg(long)]
    pub train_limit: Option<usize>,
    #[command(flatten)]
    pub test: TestDataArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epochs without test-loss improvement before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Checkpoint path (default <out-dir>/model.ckpt).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct EvaluateArgs {
    /// Expected architecture; a checkpoint of another kind is rejected.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub test: TestDataArgs,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct EstimateArgs {
    /// Number of layers L.
    #[arg(long)]
    pub layers: Option<u64>,
    /// Layer width n.
    #[arg(long)]
    pub n: Option<u64>,
    /// Batch size b.
    #[arg(long)]
    pub batch: Option<u64>,
    /// CSV with columns L,n,b; one report per row.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Also write resources.csv here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QOCNN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("QOCNN_THREADS must be a non-negative integer, got '{raw}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let resolver = config::Resolver::from_file(cli.config.as_deref())?;
    match cli.command {
        Command::Train(a) => commands::train(*a, resolver),
        Command::Evaluate(a) => commands::evaluate(a, resolver),
        Command::Gradcheck(a) => commands::gradcheck(a, resolver),
        Command::Estimate(a) => commands::estimate(a, resolver),
        Command::Export(a) => commands::export(a, resolver),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
