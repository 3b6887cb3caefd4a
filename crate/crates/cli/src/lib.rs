//! Config-driven runner for the lattice experiments: one subcommand per probe,
//! JSON reports with CSV sidecars, and exit codes that separate configuration
//! errors from failed assertions.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run, Outcome, RunError, Status};
pub use config::{ConfigError, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CYCLE: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "lra",
    version,
    about = "Coupled map lattice experiments on a finite box"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the connectivity graph; print an enumeration or a cycle witness.
    CheckTopology(RunArgs),
    /// Write one trajectory as CSV.
    Simulate(RunArgs),
    /// Convergence of random initial data to a unique limit solution.
    Lra(RunArgs),
    /// Amplification of a boundary perturbation with boundary distance.
    Sensitivity(RunArgs),
    /// Mutual convergence under free boundary conditions.
    FreeBc(RunArgs),
    /// Two distinct solutions under periodic boundary conditions.
    Periodic(RunArgs),
    /// Noise-induced spreading and the Wasserstein contraction diagnostic.
    Stochastic(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckTopology(_) => "check-topology",
            Command::Simulate(_) => "simulate",
            Command::Lra(_) => "lra",
            Command::Sensitivity(_) => "sensitivity",
            Command::FreeBc(_) => "free-bc",
            Command::Periodic(_) => "periodic",
            Command::Stochastic(_) => "stochastic",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::CheckTopology(a)
            | Command::Simulate(a)
            | Command::Lra(a)
            | Command::Sensitivity(a)
            | Command::FreeBc(a)
            | Command::Periodic(a)
            | Command::Stochastic(a) => a,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory [default: output.dir from the config, else ./out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for ensembles [default: all cores].
    #[arg(long, value_name = "N", env = "LRA_THREADS")]
    pub threads: Option<usize>,
}

/// Loads the config, applies flag overrides and runs the command.
pub fn execute(command: &Command) -> Result<Outcome, RunError> {
    let args = command.args();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(ConfigError::Invalid {
                key: "--threads".into(),
                message: "must be at least 1".into(),
            }
            .into());
        }
        // fails only if a pool already exists, as in repeated in-process calls
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = match (&args.out, &config.output.dir) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => PathBuf::from("out"),
    };
    run(command.name(), &config, &out)
}
