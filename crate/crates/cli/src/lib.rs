//! Command-line front end: argument parsing, project config and the
//! subcommand implementations behind the `rigidflow` binary.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use args::{Cli, Command};
use error::CliError;

/// Runs one parsed invocation.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let args = match &cli.command {
        Command::Synth(a) => return commands::synth(a),
        Command::Extract(a)
        | Command::Transfer(a)
        | Command::Render(a)
        | Command::Metrics(a)
        | Command::GraphDump(a) => a,
    };
    let config = args.resolve()?;
    if args.dump_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    match &cli.command {
        Command::Extract(_) => commands::extract(&config),
        Command::Transfer(_) => commands::transfer(&config),
        Command::Render(_) => commands::render_cmd(&config),
        Command::Metrics(_) => commands::metrics(&config),
        Command::GraphDump(_) => commands::graph_dump(&config),
        Command::Synth(_) => unreachable!("handled above"),
    }
}

/// Sizes the global thread pool; `None` or 0 keeps the default.
pub fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}"))),
        _ => Ok(()),
    }
}
