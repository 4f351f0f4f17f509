use std::process::ExitCode;

use clap::Parser;
use rigidflow_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = rigidflow_cli::init_threads(cli.threads).and_then(|()| rigidflow_cli::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
