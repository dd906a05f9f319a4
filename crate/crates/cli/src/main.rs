//! `pmsm-obs`: run, analyze and sweep PMSM observability scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pmsm_observability::config::{parse_config, RunConfig};
use pmsm_observability::runner::{exit_code, run_command, Mode};
use pmsm_observability::simulation::{default_paper_scenario, MachineKind};
use pmsm_observability::Error;

#[derive(Parser)]
#[command(name = "pmsm-obs", version, about = "Sensorless PMSM observability laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario with the EKF and write the trajectory CSV and a summary.
    Simulate(Common),
    /// Observability along a scenario, a CSV trajectory or at one state, without the EKF.
    Analyze(Common),
    /// Repeat the scenario over the grid in the [sweep] section.
    Sweep(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Machine {
    Ipmsm,
    Spmsm,
}

#[derive(Args)]
struct Common {
    /// TOML configuration. Without it the reference scenario for --machine is used.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Reference machine used when no config file is given.
    #[arg(long, value_enum, default_value = "ipmsm")]
    machine: Machine,
    /// Output directory, overriding [output].dir.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Measurement-noise seed, overriding [scenario].seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective configuration, defaults included, and exit.
    #[arg(long)]
    print_config: bool,
}

fn load(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::from_scenario(default_paper_scenario(match c.machine {
            Machine::Ipmsm => MachineKind::Ipmsm,
            Machine::Spmsm => MachineKind::Spmsm,
        })),
    };
    if let Some(dir) = &c.out {
        cfg.output.dir = Some(dir.clone());
    }
    if let Some(seed) = c.seed {
        cfg.scenario.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, mode) = match &cli.command {
        Command::Simulate(c) => (c, Mode::Simulate),
        Command::Analyze(c) => (c, Mode::Analyze),
        Command::Sweep(c) => (c, Mode::Sweep),
    };
    let result = load(common).and_then(|cfg| {
        if common.print_config {
            Ok(cfg.to_toml())
        } else {
            run_command(&cfg, mode)
        }
    });
    match &result {
        Ok(text) => print!("{text}"),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
