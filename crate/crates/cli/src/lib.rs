//! Command-line pipeline around the core library: synthesize spectra, fit
//! them, retrieve the resonant-path phase, and report. One declarative config
//! file drives all stages; reruns of the same config are byte-identical.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use commands::fit::cmd_fit;
pub use commands::phases::cmd_phases;
pub use commands::report::cmd_report;
pub use commands::simulate::cmd_simulate;
pub use config::RunConfig;
pub use error::CliError;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fanox",
    version,
    about = "Thin-film cavity line analysis: simulate, fit, phases, report"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize one counting spectrum per configured angle
    Simulate(StageArgs),
    /// Fit every spectrum and build the cross-angle table
    Fit(StageArgs),
    /// Retrieve the resonant-path phase and the coherence estimate
    Phases(StageArgs),
    /// Aggregate all artifacts into a markdown report
    Report(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Run configuration (TOML)
    config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

impl StageArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(jobs) = self.jobs {
            if jobs == 0 {
                return Err(CliError::Config("--jobs must be >= 1".into()));
            }
            // First initialization wins; later stages in one process share it.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global();
        }
        Ok(config)
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(&args.load()?),
        Cmd::Fit(args) => cmd_fit(&args.load()?),
        Cmd::Phases(args) => cmd_phases(&args.load()?),
        Cmd::Report(args) => cmd_report(&args.load()?),
    }
}

/// Binary entry point; exit codes: 0 success, 1 config, 2 data, 3 numerical.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
