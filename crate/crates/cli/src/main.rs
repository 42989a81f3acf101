use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use cmv_weyl::CmvError;

mod commands;
mod config;
mod output;
mod verify;

use config::{Command, Flags, RunConfig};

/// Weyl-Titchmarsh computations for CMV operators.
#[derive(Parser, Debug)]
#[command(name = "cmv", version)]
struct Cli {
    /// may be omitted when the config file names it
    #[arg(value_enum)]
    command: Option<Command>,
    #[command(flatten)]
    flags: Flags,
}

/// 2 config/parse/io, 3 domain-type, 4 singular-type, 5 rank-type.
fn exit_code(e: &CmvError) -> u8 {
    match e {
        CmvError::Parse(_) | CmvError::Io(_) => 2,
        CmvError::Domain(_)
        | CmvError::Size(_)
        | CmvError::Precondition(_)
        | CmvError::PoleRegion(_)
        | CmvError::IllPosed(_) => 3,
        CmvError::Singular(_) | CmvError::Tangential(_) | CmvError::Branch(_) => 4,
        CmvError::Rank { .. } | CmvError::IllConditioned(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::resolve(cli.command, &cli.flags).and_then(|cfg| {
        let (art, ok) = commands::run(&cfg)?;
        let text = output::render(&cfg, &art)?;
        match &cfg.output {
            Some(p) => output::write_atomic(p, &text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cmv: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
