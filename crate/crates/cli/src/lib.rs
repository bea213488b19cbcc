//! `asttrans` command-line pipeline: extraction, corpus building, model
//! training, augmented search and the evaluation reports.
//!
//! Every command writes a [`manifest::RunManifest`] next to its outputs and
//! exits with 0 (success), 1 (usage), 2 (data) or 3 (internal invariant).

pub mod args;
pub mod cache;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult, ExitKind};

pub const THREADS_ENV: &str = "ASTTRANS_THREADS";

/// Sizes the global rayon pool from `ASTTRANS_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // A pool already built (e.g. by an earlier call in the same process) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let cache = cache::Cache::from_env();
    match cli.command {
        Command::Extract(a) => commands::corpus::extract(&a, &cache),
        Command::BuildCorpora(a) => commands::corpus::build_corpora(&a),
        Command::Stats(a) => commands::corpus::stats(&a),
        Command::TrainEmbedder(a) => commands::train::train_embedder(&a),
        Command::TrainTranslator(a) => commands::train::train_translator(&a),
        Command::Translate(a) => commands::train::translate(&a),
        Command::SynthVectors(a) => commands::search::synth_vectors(&a),
        Command::Search(a) => commands::search::search(&a, &cache),
        Command::Sweep(a) => commands::search::sweep(&a, &cache),
        Command::Eval(a) => commands::eval::eval(&a),
        Command::Rq1(a) => commands::eval::rq1(&a),
    }
}
