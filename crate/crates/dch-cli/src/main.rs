//! Command line driver for the dch simulation library.
//!
//! Exit codes: 0 success, 1 invalid input (arguments, configs, snapshots),
//! 2 runtime failure (a valid run that could not finish).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod outdir;
mod snapshot;

#[derive(Parser)]
#[command(
    name = "dch",
    version,
    about = "Degenerate phase-field dynamics with a stabilized mobility",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a config file, writing diagnostics and snapshots
    Simulate {
        /// TOML run configuration
        #[arg(long)]
        config: PathBuf,
    },
    /// Continue a simulation from a snapshot written by an earlier run
    Resume {
        /// TOML run configuration (must match the snapshot's parameters)
        #[arg(long)]
        config: PathBuf,
        /// Snapshot file to continue from
        #[arg(long)]
        from: PathBuf,
    },
    /// Solve the planar transition profile and print its constants
    Profile {
        /// Double-well shape: quartic or scaled_quartic
        #[arg(long, default_value = "quartic")]
        potential: String,
        /// Degeneracy exponent of the stabilized mobility
        #[arg(long)]
        m: f64,
        /// Mobility prefactor
        #[arg(long, default_value_t = 1.0)]
        m0: f64,
    },
    /// Measure the decay rate of a perturbed circle against the
    /// sharp-interface prediction
    VerifyInterface {
        /// TOML run configuration with a mode_perturbed_circle initial
        /// condition
        #[arg(long)]
        config: PathBuf,
        /// Also integrate the sharp-interface law directly and report its
        /// rate next to the spectral measurement
        #[arg(long)]
        oracle: bool,
    },
    /// Rerun one problem across a decreasing list of stabilizer widths
    SweepTheta {
        /// TOML run configuration
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated widths, strictly decreasing (default 0.2,0.1,0.05,0.025)
        #[arg(long)]
        thetas: Option<String>,
    },
    /// Rerun one problem on nested grids and compare against the finest
    RefineGrid {
        /// TOML run configuration; its grid must be the finest size
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated grid sizes, increasing and nested (e.g. 32,64,128)
        #[arg(long)]
        sizes: String,
    },
    /// Evolve loops under the nonlocal coupling, tracking per-loop geometry
    Climb {
        /// TOML run configuration with [model.climb] and a tanh_loops
        /// initial condition
        #[arg(long)]
        config: PathBuf,
    },
}

fn dispatch(cmd: Command) -> error::CliResult<()> {
    match cmd {
        Command::Simulate { config } => commands::simulate(&config),
        Command::Resume { config, from } => commands::resume(&config, &from),
        Command::Profile { potential, m, m0 } => commands::profile_constants(&potential, m, m0),
        Command::VerifyInterface { config, oracle } => {
            commands::verify_interface(&config, oracle)
        }
        Command::SweepTheta { config, thetas } => {
            let parsed = thetas.as_deref().map(commands::parse_thetas).transpose()?;
            commands::sweep_theta(&config, parsed)
        }
        Command::RefineGrid { config, sizes } => {
            commands::refine_grid(&config, &commands::parse_sizes(&sizes)?)
        }
        Command::Climb { config } => commands::climb(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not errors
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
