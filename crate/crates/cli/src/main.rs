mod args;
mod bench;
mod error;
mod generate;
mod io;
mod validate;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("RVE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().map_err(|_| {
        CliError::usage(format!(
            "RVE_THREADS must be a non-negative integer, got {value:?}"
        ))
    })?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(CliError::usage)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Generate(a) => generate::run(a),
        Command::Bench(a) => bench::run_bench(a),
        Command::BacktrackStudy(a) => bench::run_backtrack_study(a),
        Command::Validate(a) => validate::run(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rve: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
