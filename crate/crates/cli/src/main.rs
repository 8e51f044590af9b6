//! `echo-lab`: command-line harness for the fidelity-decay simulation library.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical-validity error.

mod config;
mod output;
mod presets;
mod run;

use clap::{Args, Parser, Subcommand};
use config::{Config, ConfigError};
use echo_lab::EchoError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "echo-lab", version, about = "Fidelity-decay experiments for chaotic model systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum kicked-rotor echo: coherent, incoherent and trace-overlap fidelities
    RotorEcho(RunArgs),
    /// Classical angular correlation function of the standard map
    RotorClassical(RunArgs),
    /// Phase autocorrelation of the driven nonlinear oscillator
    OscCorrelation(RunArgs),
    /// Mixed-state fidelity against the golden-rule prediction
    OscFgr(RunArgs),
    /// Semiclassical (initial-value) fidelity amplitude
    OscIvr(RunArgs),
    /// Occupation populations of an isotropic coherent-state mixture
    GlauberPopulations(RunArgs),
    /// Re-fit an existing CSV series with a new window
    Fit(RunArgs),
    /// List shipped preset configurations (write them with --out)
    Presets {
        /// Directory to write the preset files into
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: current directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Worker-thread count (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::RotorEcho(_) => "rotor-echo",
            Command::RotorClassical(_) => "rotor-classical",
            Command::OscCorrelation(_) => "osc-correlation",
            Command::OscFgr(_) => "osc-fgr",
            Command::OscIvr(_) => "osc-ivr",
            Command::GlauberPopulations(_) => "glauber-populations",
            Command::Fit(_) => "fit",
            Command::Presets { .. } => "presets",
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code_for(err: &EchoError) -> u8 {
    match err {
        EchoError::InvalidDimension(_)
        | EchoError::InvalidRegion(_)
        | EchoError::InvalidParameter(_)
        | EchoError::EmptyEnsemble(_)
        | EchoError::InsufficientData(_)
        | EchoError::Parse(_)
        | EchoError::Io(_) => EXIT_CONFIG,
        EchoError::DimensionMismatch(_)
        | EchoError::FitDomain(_)
        | EchoError::UnreliableDerivative(_)
        | EchoError::Truncation(_)
        | EchoError::MatchingFailed(_) => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = cli.command.kind();
    let args = match cli.command {
        Command::Presets { out } => return presets::list(out.as_deref()),
        Command::RotorEcho(a)
        | Command::RotorClassical(a)
        | Command::OscCorrelation(a)
        | Command::OscFgr(a)
        | Command::OscIvr(a)
        | Command::GlauberPopulations(a)
        | Command::Fit(a) => a,
    };

    let config = match Config::load(&args.config) {
        Ok(c) => c,
        Err(ConfigError(msg)) => {
            eprintln!("configuration error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if config.experiment.kind != kind {
        eprintln!(
            "configuration error: experiment.kind is {:?} but the {kind} subcommand was invoked",
            config.experiment.kind
        );
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("configuration error: --threads {threads}: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let out_dir = args.out.unwrap_or_else(|| PathBuf::from("."));
    let seed = args.seed.unwrap_or(config.experiment.seed);
    match run::run(&config, &out_dir, seed) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
