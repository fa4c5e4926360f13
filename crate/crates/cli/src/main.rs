use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use fluxq_cli::{emit, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    let result = run(&cli.command).and_then(|out| emit(cli.command.config(), &out));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fluxq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
