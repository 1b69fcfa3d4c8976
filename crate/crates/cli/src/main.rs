use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dispersive_sinr::scenario::{self, CommandOutput, OutputFormat, RunOptions, Scenario};
use dispersive_sinr::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;
const EXIT_UNSUPPORTED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "dispersive-sinr",
    version,
    about = "SINR of CP-, ZP- and UF-OFDM over doubly dispersive channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare analytic powers with Monte Carlo estimates.
    Verify(Args),
    /// Mean SINR along a delay or Doppler axis.
    Sweep(Args),
    /// Mean SINR over a delay x Doppler grid.
    Heatmap(Args),
    /// Per-user and sum capacity of a multi-user uplink.
    Uplink(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy)]
enum Format {
    Csv,
    Json,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::UnsupportedRegime { .. } => EXIT_UNSUPPORTED,
        _ => EXIT_CONFIG,
    }
}

fn run(command: &Command) -> Result<CommandOutput, Error> {
    let (Command::Verify(args) | Command::Sweep(args) | Command::Heatmap(args) | Command::Uplink(args)) = command;
    let scenario = Scenario::from_file(&args.scenario)?;
    let opts = RunOptions {
        seed: args.seed,
        workers: args.workers.map(|w| w as usize),
    };
    let output = match command {
        Command::Verify(_) => scenario::run_verify(&scenario, opts)?,
        Command::Sweep(_) => scenario::run_sweep(&scenario, opts)?,
        Command::Heatmap(_) => scenario::run_heatmap(&scenario, opts)?,
        Command::Uplink(_) => scenario::run_uplink(&scenario, opts)?,
    };
    let dir = args
        .out
        .clone()
        .or_else(|| scenario.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let format = match args.format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => scenario.output_format.unwrap_or_default(),
    };
    for line in &output.summary {
        println!("{line}");
    }
    for path in output.write(&dir, format)? {
        println!("wrote {}", path.display());
    }
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(out) if out.verification_failed => {
            eprintln!("verification failed: analytic and simulated powers differ beyond 3 standard errors");
            ExitCode::from(EXIT_VERIFICATION)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
