use std::process::ExitCode;

use aoi_relay_cli::args::{Cli, Command};
use aoi_relay_cli::{commands, Failure};
use clap::Parser;

const THREADS_VAR: &str = "AOI_RELAY_THREADS";

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::new(Failure::USAGE, format!("{THREADS_VAR}={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::new(Failure::USAGE, format!("cannot start thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Dist(a) => commands::dist(a),
        Command::Moments(a) => commands::moments(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Compare(a) => commands::compare(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
