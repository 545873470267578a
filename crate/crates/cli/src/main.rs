use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use aitsahalia_cli::{parse_config, runner, CliError};

/// Monte Carlo experiments for a jump-extended Ait-Sahalia rate model.
#[derive(Debug, Parser)]
#[command(name = "aitsahalia", version, about)]
struct Args {
    /// Experiment configuration file (flat `key = value` document).
    #[arg(long)]
    config: PathBuf,

    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides the number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,

    /// Suppresses the one-line summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = args.paths {
        if paths == 0 {
            return Err(CliError::Config("paths must be positive".into()));
        }
        cfg.paths = paths;
    }
    let summary = runner::run(&cfg)?;
    if !args.quiet {
        println!("{summary}");
    }
    Ok(())
}
