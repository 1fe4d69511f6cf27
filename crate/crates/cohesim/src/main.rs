//! Thin command-line front end over the library's batch entry points.

use clap::{Parser, Subcommand};
use cohesim::commands::{cmd_analyze, cmd_run, cmd_topologies, cmd_train, CmdError};
use cohesim::config::RunConfig;
use cohesim::topology::TopologyKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cohesim",
    version,
    about = "coherence-aware NoC simulation and routing optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write metric reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config [output].dir or "out").
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Train the topology/link-weight agent on the configured workload.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Recompute aggregates from a transaction dump.
    Analyze {
        transactions: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Print a topology edge list and validation report.
    Topologies {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        cores: usize,
        #[arg(long)]
        quiet: bool,
    },
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(RunConfig, PathBuf), CmdError> {
    let mut cfg = RunConfig::from_path(path).map_err(CmdError::Config)?;
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    let out_dir = out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out_dir))
}

fn run(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            quiet,
        } => {
            let (cfg, out_dir) = load_config(&config, seed, out)?;
            cmd_run(&cfg, &out_dir, quiet)?;
        }
        Command::Train {
            config,
            seed,
            out,
            quiet,
        } => {
            let (cfg, out_dir) = load_config(&config, seed, out)?;
            cmd_train(&cfg, &out_dir, quiet)?;
        }
        Command::Analyze {
            transactions,
            quiet,
        } => {
            cmd_analyze(&transactions, quiet)?;
        }
        Command::Topologies { kind, cores, quiet } => {
            let kind: TopologyKind = kind.parse().map_err(CmdError::Config)?;
            cmd_topologies(kind, cores, quiet)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are not errors; bad usage exits 1.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CmdError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e @ CmdError::Runtime(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
