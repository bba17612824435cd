//! Command-line runner for binned counting statistics in Haar-random
//! multiport networks.

mod commands;
mod config;
mod output;
mod scan;
mod verify;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Config, RunArgs};

#[derive(Parser)]
#[command(
    name = "haarcount",
    version,
    about = "Counting statistics of identical particles in binned outputs of Haar-random \
             unitary networks",
    after_help = "Values may come from flags or from a flat TOML file via --config; \
                  flags override the file. Probabilities are emitted in linear and \
                  natural-log columns."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact probability table over all count vectors (rational arithmetic)
    Exact(RunArgs),
    /// Compare the asymptotic Gaussian law against exact probabilities inside the window
    Gauss(RunArgs),
    /// Audit the explicit tail bounds outside the window
    Tail(RunArgs),
    /// Max in-window relative error of the Gaussian law over a list of N (convergence evidence)
    Sweep(RunArgs),
    /// Monte Carlo averages over Haar-random unitaries or random inputs
    Mc(RunArgs),
    /// Run the full invariant suite and report pass/fail per property
    Verify(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Exact(a)
            | Command::Gauss(a)
            | Command::Tail(a)
            | Command::Sweep(a)
            | Command::Mc(a)
            | Command::Verify(a) => a,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Exact(_) => "exact",
            Command::Gauss(_) => "gauss",
            Command::Tail(_) => "tail",
            Command::Sweep(_) => "sweep",
            Command::Mc(_) => "mc",
            Command::Verify(_) => "verify",
        }
    }
}

fn run(cli: &Cli, config: &Config) -> Result<i32> {
    let (table, exit) = match &cli.command {
        Command::Exact(_) => (commands::exact(config)?, 0),
        Command::Gauss(_) => (commands::gauss(config)?, 0),
        Command::Tail(_) => (commands::tail(config)?, 0),
        Command::Sweep(_) => (commands::sweep(config)?, 0),
        Command::Mc(_) => (commands::mc(config)?, 0),
        Command::Verify(_) => {
            let (table, ok) = verify::run(config)?;
            (table, if ok { 0 } else { 1 })
        }
    };
    // verify prints its report; write the table only when a path was given.
    if !matches!(cli.command, Command::Verify(_)) || config.out_path().is_some() {
        table.emit(config.out_path().as_deref(), config.format()?)?;
    }
    Ok(exit)
}

fn main() {
    let cli = Cli::parse();
    let outcome = (|| -> Result<i32> {
        let config = Config::from_args(cli.command.args())?;
        let threads = config.threads()?;
        match threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()?
                .install(|| run(&cli, &config)),
            None => run(&cli, &config),
        }
    })();
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error [{}]: {err:#}", cli.command.name());
            std::process::exit(2);
        }
    }
}
