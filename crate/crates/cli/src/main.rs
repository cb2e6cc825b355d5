//! `dinseg`: synthesize datasets, decompose annotation maps, train K-to-1
//! networks and evaluate them.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 partition
//! violation, 3 non-finite training loss. Failures print one JSON object
//! to stderr.

mod config;
mod decompose;
mod eval;
mod failure;
mod synth;
mod train;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use failure::{CmdResult, Failure};

#[derive(Debug, Parser)]
#[command(name = "dinseg", version, about = "Decompose-and-integrate segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    Synth(synth::SynthArgs),
    /// Decompose every annotation map of a dataset.
    Decompose(decompose::DecomposeArgs),
    /// Train a K-to-1 network.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(eval::EvalArgs),
}

/// Pretty JSON with a trailing newline.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).map_err(dinseg::Error::from)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| {
        Failure::from(dinseg::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn init_threads() -> CmdResult {
    let Ok(raw) = std::env::var("DINSEG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::input(format!("DINSEG_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::input(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> CmdResult {
    init_threads()?;
    match &cli.command {
        Command::Synth(a) => synth::run(a),
        Command::Decompose(a) => decompose::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // help and version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", Failure::input(e.to_string().trim_end()).to_json());
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code)
        }
    }
}
