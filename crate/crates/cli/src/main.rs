mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::commands::Command;
use crate::config::RunConfig;
use crate::error::CliResult;

/// Superposed photon subtraction and addition: phase-space, nonclassicality
/// and heralding-scheme data as CSV or JSON.
#[derive(Debug, Parser)]
#[command(name = "subadd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    config: RunConfig,
}

fn run(cli: Cli) -> CliResult<()> {
    let (mut cfg, warnings) = cli.config.resolve()?;
    for w in &warnings {
        eprintln!("{w}");
    }
    let (out, format) = commands::run(cli.command, &mut cfg)?;
    let mut record = serde_json::to_value(&cfg).unwrap_or_default();
    record["command"] = cli.command.name().into();
    if let Command::Fig { which } = cli.command {
        record["figure"] = which.into();
    }
    let text = output::render(&out, &record, format)?;
    output::write(&text, cfg.out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("subadd: {e}");
            e.exit_code()
        }
    }
}
