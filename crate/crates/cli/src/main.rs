mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Effective;
use error::{CliError, Result};

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    let eff = Effective::new(rayon::current_num_threads(), cli.seed);
    match &cli.command {
        Command::Solve(a) => commands::solve(eff, cli.seed, a),
        Command::Synth { kind } => commands::synth(eff, cli.seed, kind),
        Command::EvalQ(a) => commands::eval_q(eff, cli.seed, a),
        Command::Query(a) => commands::query(eff, a),
        Command::Heatmap(a) => commands::heatmap(eff, a),
        Command::Check(a) => commands::check(eff, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
