use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarmctl::{commands, exit_code_for};

#[derive(Parser)]
#[command(
    name = "swarmctl",
    about = "Simulate, sweep and map consensus regions of multiagent alignment and attraction-repulsion dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes trajectory.csv and summary.json.
    Simulate {
        config: PathBuf,
        /// Output directory (defaults to the config's output block).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun a scenario across values of one numeric parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path of the parameter, e.g. control.m or model.kernel.beta.
        #[arg(long)]
        param: String,
        /// Comma-separated numeric values; an empty list runs nothing.
        #[arg(long, default_value = "")]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo consensus-probability grid with boundaries and contours.
    Region {
        config: PathBuf,
        /// Worker thread cap for the cell sweep.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_values(raw: &str) -> Result<Vec<f64>, swarm_lab::Error> {
    raw.split(',')
        .filter(|tok| !tok.trim().is_empty())
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| swarm_lab::Error::config(format!("non-numeric sweep value '{tok}'")))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out } => commands::cmd_simulate(config, out),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => parse_values(values)
            .and_then(|values| commands::cmd_sweep(config, param, &values, out)),
        Command::Region { config, jobs, out } => commands::cmd_region(config, *jobs, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("swarmctl: {err}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
