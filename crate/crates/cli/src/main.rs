use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snap_cli::{resolve, run_and_write, Scenario};

#[derive(Parser)]
#[command(name = "snap", version, about = "SNAP gate simulation, optimization and error budgets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unoptimized and optimized coherent error over the χT grid.
    DurationScan(Common),
    /// Optimize one target at `chiT`.
    Optimize(Common),
    /// Error budgets of the five protocols at their optimal gate times.
    ProtocolCompare(Common),
    /// Synthetic interference measurement and phase-error recovery.
    Interference(Common),
    /// Wigner function of the simulated gate output.
    Wigner(Common),
    /// Optimization limit per target.
    LimitSearch(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a field, e.g. `--set optimizer.eta=0.3`.
    #[arg(long = "set", value_name = "DOTPATH=VALUE")]
    sets: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, common) = match cli.command {
        Command::DurationScan(c) => (Scenario::DurationScan, c),
        Command::Optimize(c) => (Scenario::Optimize, c),
        Command::ProtocolCompare(c) => (Scenario::ProtocolCompare, c),
        Command::Interference(c) => (Scenario::Interference, c),
        Command::Wigner(c) => (Scenario::Wigner, c),
        Command::LimitSearch(c) => (Scenario::LimitSearch, c),
    };
    let result = resolve(common.config.as_deref(), &common.sets).and_then(|mut config| {
        config.out = common.out;
        config.workers = common.workers;
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        run_and_write(scenario, &config).map(|a| (config.out, a))
    });
    match result {
        Ok((dir, artifacts)) => {
            for name in artifacts.names() {
                println!("{}", dir.join(name).display());
            }
            println!("{}", dir.join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
