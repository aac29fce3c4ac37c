//! `nvi` command-line front end.
//!
//! Every command writes a [`results::ResultsDocument`]. Exit codes: 0 success,
//! 1 usage error, 2 data error, 3 internal invariant violation.

pub mod alloc;
pub mod bench;
pub mod commands;
pub mod results;
pub mod svg;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use commands::Ctx;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Bad invocation or missing input.
#[derive(Debug)]
pub struct UsageError(pub String);

/// A checked invariant failed.
#[derive(Debug)]
pub struct InternalError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for InternalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for InternalError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "nvi", version, about = "Neurovascular instability scoring toolkit")]
pub struct Cli {
    /// Seed for every random stream the command uses.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output directory; results.json and data files are written there.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// What to print on stdout: the results document or the command's table.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PPG record to HRV, perfusion and morphology features.
    Pipeline(commands::pipeline::PipelineArgs),
    /// Composite NVI for each row of a modality CSV.
    Score(commands::score::ScoreArgs),
    /// Synthetic trajectories, datasets and PPG/ECG recordings.
    #[command(subcommand)]
    Synth(commands::synth::SynthCmd),
    /// Train the transformer on a stored dataset.
    Train(commands::train::TrainArgs),
    /// Transformer, logistic baseline and composite on the test split.
    Eval(commands::eval::EvalArgs),
    /// Group comparisons, agreement and ROC on CSV columns.
    #[command(subcommand)]
    Stats(commands::stats::StatsCmd),
    /// Monte Carlo perturbation sweep and recovery fits.
    #[command(subcommand)]
    Mc(commands::mc::McCmd),
    /// Hydration conductivity curve.
    #[command(subcommand)]
    Biosense(commands::biosense::BiosenseCmd),
    /// Latency, allocation and determinism check of composite scoring.
    Bench(commands::bench::BenchArgs),
}

/// Maps an error chain to an exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<InternalError>() {
            return EXIT_INTERNAL;
        }
        if let Some(nvi_model::ModelError::Detached) = cause.downcast_ref::<nvi_model::ModelError>() {
            return EXIT_INTERNAL;
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return EXIT_USAGE;
            }
        }
    }
    EXIT_DATA
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
        format: cli.format,
    };
    match cli.command {
        Command::Pipeline(a) => commands::pipeline::run(&ctx, a),
        Command::Score(a) => commands::score::run(&ctx, a),
        Command::Synth(c) => commands::synth::run(&ctx, c),
        Command::Train(a) => commands::train::run(&ctx, a),
        Command::Eval(a) => commands::eval::run(&ctx, a),
        Command::Stats(c) => commands::stats::run(&ctx, c),
        Command::Mc(c) => commands::mc::run(&ctx, c),
        Command::Biosense(c) => commands::biosense::run(&ctx, c),
        Command::Bench(a) => commands::bench::run(&ctx, a),
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
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
