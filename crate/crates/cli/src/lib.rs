//! The `coverkit` command line: argument parsing, subcommand dispatch and
//! report output. Each subcommand lives in its own module and returns a
//! serializable report; `main.rs` only maps the outcome to an exit code.

pub mod bench;
pub mod covers;
pub mod evaluate;
pub mod interpolate;
pub mod output;
pub mod sample;
pub mod simulate;
pub mod validate;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub const THREADS_ENV: &str = "COVERKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "coverkit", version, about = "Plant-cover label densification, patch sampling and evaluation")]
pub struct Cli {
    /// Render a human-readable table on stdout instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a manifest for gaps, unlabelled tails and unusable series.
    Validate(validate::Args),
    /// Label unannotated frames by linear interpolation between references.
    Interpolate(interpolate::Args),
    /// Draw random patch positions for an image.
    Sample(sample::Args),
    /// Score predicted cover against targets (MSAE, DPC, optional mIoU).
    Evaluate(evaluate::Args),
    /// Run the synthetic end-to-end pipeline.
    Simulate(simulate::Args),
    /// Time patch sampling and extraction for several patch sizes.
    Bench(bench::Args),
}

/// Successful completion, with or without reportable findings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Findings,
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Clean => ExitCode::SUCCESS,
            Outcome::Findings => ExitCode::from(2),
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let pretty = cli.pretty;
    match cli.command {
        Command::Validate(args) => validate::run(&args, pretty),
        Command::Interpolate(args) => interpolate::run(&args, pretty),
        Command::Sample(args) => sample::run(&args, pretty),
        Command::Evaluate(args) => evaluate::run(&args, pretty),
        Command::Simulate(args) => simulate::run(&args, pretty),
        Command::Bench(args) => bench::run(&args, pretty),
    }
}

/// Caps the global worker pool at `COVERKIT_THREADS` when it is set.
fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
        anyhow::ensure!(threads > 0, "{THREADS_ENV} must be a positive integer, got 0");
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

/// Parses `args`, runs the command and maps the result to an exit code:
/// 0 success, 1 usage or input error, 2 findings.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(outcome) => outcome.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub(crate) fn read_text(path: &PathBuf) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}
