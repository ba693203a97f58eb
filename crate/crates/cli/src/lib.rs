//! `seqimp` command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod config;
mod gaps;

pub use gaps::GapSpec;

pub const EXIT_OK: i32 = 0;
/// Usage, configuration, I/O or failed self-check.
pub const EXIT_ERROR: i32 = 1;
/// Benchmark finished with failed cells.
pub const EXIT_PARTIAL: i32 = 2;
/// Training diverged.
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "seqimp",
    version,
    about = "Sequence-to-sequence gap imputation for time series"
)]
pub struct Cli {
    /// Print the annotated default configuration and exit.
    #[arg(long)]
    pub print_defaults: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic series as CSV.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint and training log.
    Train(RunArgs),
    /// Fill gaps in a CSV file with a trained model.
    Impute(ImputeArgs),
    /// Benchmark model variants and write metric and Borda tables.
    Eval(RunArgs),
    /// Compare analytic and finite-difference gradients on random tiny models.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// sine, sum-of-sines or random-walk
    #[arg(long, default_value = "sine")]
    pub kind: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian noise std (step std for random-walk).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 24.0)]
    pub period: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides training.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides output.dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides eval.jobs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides model.schedule: paper-eq1 or endpoint.
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// START:LENGTH with START the 1-based data row (header excluded).
    #[arg(long = "gap", value_name = "START:LENGTH")]
    pub gaps: Vec<GapSpec>,
    #[arg(long)]
    pub out: PathBuf,
    /// Config supplying header mode and missing markers.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the checkpoint's schedule: paper-eq1 or endpoint.
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, default_value_t = 3)]
    pub max_input_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub max_hidden: usize,
    #[arg(long, default_value_t = 3)]
    pub max_gap: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Adds this amount to one analytic gradient entry.
    #[arg(long, hide = true)]
    pub corrupt: Option<f64>,
}

fn exit_code(err: &anyhow::Error) -> i32 {
    let diverged = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<seqimp::Error>(), Some(seqimp::Error::Diverged { .. })));
    if diverged {
        EXIT_DIVERGED
    } else {
        EXIT_ERROR
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.print_defaults {
        print!("{}", config::DEFAULTS_TOML);
        return EXIT_OK;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (synth, train, impute, eval, gradcheck); see --help");
        return EXIT_ERROR;
    };
    let result = match command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Impute(a) => commands::impute(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
