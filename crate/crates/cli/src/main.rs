use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use plasim_cli::config::Experiment;
use plasim_cli::output::Provenance;
use plasim_cli::{commands, CliError, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "plasim",
    version,
    about = "Propagator measurement and least-action trajectory simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reconstruct propagators and compare with the closed-form kernels.
    PropagatorScan(RunArgs),
    /// Extract classical positions along a trajectory.
    Trajectory(RunArgs),
    /// Fidelity of M'' under a time perturbation.
    Robustness(RunArgs),
    /// Heralded second-order correlation of a simulated source.
    G2(RunArgs),
    /// Direct measurement of a transverse wavefunction.
    Wavefunction(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::PropagatorScan(a) => (Experiment::PropagatorScan, a),
            Command::Trajectory(a) => (Experiment::Trajectory, a),
            Command::Robustness(a) => (Experiment::Robustness, a),
            Command::G2(a) => (Experiment::G2, a),
            Command::Wavefunction(a) => (Experiment::Wavefunction, a),
        }
    }
}

const DEFAULT_OUT: &str = "plasim-out";

fn execute(experiment: Experiment, args: RunArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if cfg.experiment != experiment {
        return Err(CliError::Config(format!(
            "configuration is for `{}`, but `{experiment}` was requested",
            cfg.experiment
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let resolved = cfg.resolve()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.into())
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    let provenance = Provenance {
        command: experiment.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };
    let result = commands::run(&cfg, &resolved, provenance)?;
    result.bundle.write(&out)?;
    log::info!(
        "wrote {} tables to {}",
        result.bundle.tables.len(),
        out.display()
    );
    match result.partial {
        Some(msg) => Err(CliError::Partial(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (experiment, args) = Cli::parse().command.split();
    match execute(experiment, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plasim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
