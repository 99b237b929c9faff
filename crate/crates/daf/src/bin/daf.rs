use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = daf::cli::Cli::parse();
    match daf::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", daf::cli::error_record(&e));
            ExitCode::FAILURE
        }
    }
}
