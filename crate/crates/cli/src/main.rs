//! `multicausal`: decide and certify causal precedence of multi-particle measures.

mod config;
mod measures;
mod report;
mod selftest;
mod wave;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigFile;
use report::CliError;

#[derive(Parser, Debug)]
#[command(name = "multicausal", version, about = "Causal precedence of multi-particle measures")]
struct Cli {
    /// JSON file with default values for any flag; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for randomized checks; recorded in every report.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether one slice measure causally precedes another.
    Precede(measures::PrecedeArgs),
    /// Check the subset condition by enumerating every set of source atoms.
    Oracle(measures::OracleArgs),
    /// Build or evaluate measures on causal trajectories.
    #[command(subcommand)]
    Curves(CurvesCommand),
    /// Simulate free multi-photon or multi-fermion dynamics.
    Evolve(wave::EvolveArgs),
    /// Certify that a sequence of measures or density snapshots is causal.
    Certify(CertifyArgs),
    /// Run the bundled checks at reduced scale.
    Selftest,
}

#[derive(Subcommand, Debug)]
enum CurvesCommand {
    /// Lift a causal evolution to a trajectory measure.
    Build(measures::CurvesBuildArgs),
    /// Push a trajectory measure forward to one time.
    Eval(measures::CurvesEvalArgs),
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// Evolution file (sequence of slice measures).
    #[arg(long)]
    pub evo: Option<PathBuf>,
    /// Directory of density snapshots written by `evolve --emit-density`.
    #[arg(long)]
    pub density: Option<PathBuf>,
    /// Exact rational weights (evolution files only).
    #[arg(long)]
    pub exact: bool,
    /// Evolution files: absolute slack on particle displacements.
    /// Density snapshots: multiplier of `atom spacing + c·dt`.
    #[arg(long)]
    pub slack: Option<f64>,
    /// Mass fraction allowed in the discarded low-density tail.
    #[arg(long)]
    pub eps_support: Option<f64>,
    /// Upper bound on atoms per certified slice.
    #[arg(long)]
    pub max_atoms: Option<usize>,
    /// Simulation time step entering the slack (default: smallest snapshot gap).
    #[arg(long)]
    pub dt_step: Option<f64>,
}

/// Settings shared by every subcommand.
pub struct Context {
    pub seed: u64,
    pub report: Option<PathBuf>,
    pub file: ConfigFile,
}

const DEFAULT_SEED: u64 = 1;

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        report: cli.report.or_else(|| file.report.clone()),
        file,
    };
    match cli.command {
        Command::Precede(args) => measures::precede(&ctx, args),
        Command::Oracle(args) => measures::oracle(&ctx, args),
        Command::Curves(CurvesCommand::Build(args)) => measures::curves_build(&ctx, args),
        Command::Curves(CurvesCommand::Eval(args)) => measures::curves_eval(&ctx, args),
        Command::Evolve(args) => wave::evolve(&ctx, args),
        Command::Certify(args) => match (args.evo.is_some(), args.density.is_some()) {
            (true, false) => measures::certify_evolution(&ctx, &args),
            (false, true) => wave::certify_density(&ctx, &args),
            _ => Err(CliError::Invalid("certify needs exactly one of --evo or --density".into())),
        },
        Command::Selftest => selftest::run(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
