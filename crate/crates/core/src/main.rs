use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtransmit::cli::{self, CliError};

#[derive(Parser)]
#[command(
    name = "qtransmit",
    version,
    about = "Faithful qubit transmission simulator"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write a JSON report.
    Run {
        config: PathBuf,
        /// Report path. Overrides `run.output`; defaults to report.json.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads. Never changes the result.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the amplitude table at one stage for a single fixed-noise trial.
    Trace {
        config: PathBuf,
        /// One of encode, noise, post-pbs2, pre-decoder, final.
        #[arg(long, default_value = cli::DEFAULT_TRACE_STAGE)]
        stage: String,
    },
    /// Run every point of the config's sweep section and emit CSV.
    Sweep {
        config: PathBuf,
        /// CSV path. Overrides `run.output`; defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the built-in invariant suite.
    Validate,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result: Result<(), CliError> = match &args.command {
        Command::Run {
            config,
            output,
            jobs,
        } => cli::cmd_run(config, output.as_deref(), *jobs, &mut out),
        Command::Trace { config, stage } => cli::cmd_trace(config, stage, &mut out),
        Command::Sweep {
            config,
            output,
            jobs,
        } => cli::cmd_sweep(config, output.as_deref(), *jobs, &mut out),
        Command::Validate => cli::cmd_validate(&mut out),
    };
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
