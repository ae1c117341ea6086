//! Command-line front end: data ingestion, file formats and the `linfa`
//! subcommands. [`run`] parses arguments, dispatches and maps failures to exit
//! codes (0 success, 1 usage or input error, 2 numerical failure, 3 EM did
//! not converge).

pub mod args;
pub mod commands;
pub mod csvio;
pub mod error;
pub mod ingest;
pub mod manifest;

use std::ffi::OsString;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_USAGE};

fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::Fit(a) => commands::fit::run(a),
        Command::Select(a) => commands::select::run(a),
        Command::Bootstrap(a) => commands::bootstrap::run(a),
        Command::Complete(a) => commands::complete::run(a),
        Command::Graph(a) => commands::graph::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.exit_code() == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .try_init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(n);
    }
    let outcome = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli.command)),
        Err(e) => Err(CliError::Usage(format!("cannot start worker threads: {e}"))),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
