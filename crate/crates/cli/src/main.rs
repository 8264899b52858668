//! `waveobs`: run observability computations described by a scenario file.

use std::process::ExitCode;

use clap::Parser;
use waveobs::{commands, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("waveobs: {e}");
            ExitCode::from(e.code())
        }
    }
}
