use std::process::ExitCode;

use clap::Parser;
use icapm_cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(&cli));
    match result {
        Ok(outcome) => {
            if outcome != icapm_cli::Outcome::Success {
                eprintln!("icapm {}: {:?}", cli.command.name(), outcome);
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
