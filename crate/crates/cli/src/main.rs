mod args;
mod commands;
mod config;
mod exit;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let raw: Vec<_> = std::env::args_os().collect();
    if let Err(e) = config::apply_config_file(&raw) {
        eprintln!("error: {e:#}");
        return ExitCode::from(exit::exit_code(&e));
    }
    let cli = match Cli::try_parse_from(&raw) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { 0 });
        }
    };
    if let Some(dir) = &cli.workdir {
        if let Err(e) = std::env::set_current_dir(dir) {
            eprintln!("error: workdir {}: {e}", dir.display());
            return ExitCode::from(exit::IO);
        }
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::exit_code(&e))
        }
    }
}
