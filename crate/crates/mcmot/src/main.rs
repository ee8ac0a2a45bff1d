use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = mcmot::cli::Cli::parse();
    match mcmot::cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcmot: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
