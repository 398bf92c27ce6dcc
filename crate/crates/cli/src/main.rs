use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = qmine_cli::Cli::parse();
    match qmine_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmine: {e}");
            e.exit_code()
        }
    }
}
