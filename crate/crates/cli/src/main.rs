use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use observer_kit_cli::commands::{self, Outcome, SimulateOptions};
use observer_kit_cli::CliError;
use serde::Serialize;

/// Synthesis, certification and simulation of distributed observers.
///
/// Exit codes: 0 ok, 1 check failed, 2 standing assumption violated,
/// 3 input error, 4 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "observer-kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check strong connectivity and joint observability.
    Check { config: PathBuf },
    /// Design the observer gains and write them to a file.
    Synthesize {
        config: PathBuf,
        /// Override the decay rate from the configuration.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(short, long, default_value = "design.json")]
        output: PathBuf,
    },
    /// Certify a design against the global error system.
    Verify { config: PathBuf, design: PathBuf },
    /// Integrate plant and observers and fit the error decay rate.
    Simulate {
        config: PathBuf,
        design: PathBuf,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV trace destination.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Include plant and estimate states in the trace.
        #[arg(long)]
        states: bool,
    },
}

fn emit<R: Serialize>(result: Result<Outcome<R>, CliError>) -> ExitCode {
    match result {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.report).expect("reports serialize")
            );
            ExitCode::from(outcome.status.code())
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.status().code())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OBSERVER_KIT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Check { config } => emit(commands::check(&config)),
        Command::Synthesize { config, alpha, output } => emit(commands::synthesize(&config, alpha, &output)),
        Command::Verify { config, design } => emit(commands::verify(&config, &design)),
        Command::Simulate {
            config,
            design,
            t_final,
            dt,
            seed,
            output,
            states,
        } => {
            let opts = SimulateOptions {
                t_final,
                dt,
                seed,
                trace: output.as_deref(),
                include_states: states,
            };
            emit(commands::simulate(&config, &design, &opts))
        }
    }
}
