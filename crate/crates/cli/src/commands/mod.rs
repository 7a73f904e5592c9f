mod detect;
mod eval;
mod fetch;
mod kl;
mod score;
mod synth;
mod train;

use crate::cli::{Cli, Command};
use crate::error::CliResult;
use crate::settings::FileConfig;

/// Top-K used when nothing else is configured.
pub const DEFAULT_TOP_K: usize = 5;

pub fn run(cli: Cli) -> CliResult<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Fetch(a) => fetch::run(a, &file),
        Command::Synth(a) => synth::run(a, &file),
        Command::Score(a) => score::run(a, &file),
        Command::Detect(a) => detect::run(a, &file),
        Command::Eval(a) => eval::run(a),
        Command::TrainMlp(a) => train::run(a, &file),
        Command::KlSweep(a) => kl::run(a),
    }
}

/// Number of worker threads; 0 means one per core.
pub fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| crate::error::CliError::config(format!("--jobs: {e}")))
}
