use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod exit;
mod files;
mod fit;
mod manifest;
mod mitigate;
mod monitor;
mod reference;
mod sim;
mod validate;

/// Delayed voltage recovery toolkit: simulate feeders, monitor μPMU
/// streams, plan mitigation and fit reduced load models.
///
/// Every global flag can also be set through the environment with the
/// `FIDVR_` prefix (`FIDVR_SEED`, `FIDVR_JOBS`, `FIDVR_OUT_DIR`).
#[derive(Debug, Parser)]
#[command(name = "fidvr", version)]
pub struct Cli {
    /// Seed for every random draw; overrides seeds given in config files.
    #[arg(long, global = true, env = "FIDVR_SEED")]
    pub seed: Option<u64>,

    /// Worker threads for scenario sweeps and suites (default: core count).
    #[arg(long, global = true, env = "FIDVR_JOBS")]
    pub jobs: Option<usize>,

    /// Directory receiving every output file.
    #[arg(long, global = true, env = "FIDVR_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one fault scenario and write the μPMU stream.
    Sim(sim::SimArgs),
    /// Detect FIDVR in a μPMU stream and estimate the recovery time.
    Monitor(monitor::MonitorArgs),
    /// Plan the cheapest control that meets the recovery criterion.
    Mitigate(mitigate::MitigateArgs),
    /// Run a closed-loop validation suite.
    Validate(validate::ValidateArgs),
    /// Fit reduced sub-models to surrogate data from the detailed feeder.
    Fit(fit::FitArgs),
    /// Write the built-in reference feeder, areas and scenarios.
    Reference(reference::ReferenceArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let ctx = files::Context::new(&cli);
    let result = match &cli.command {
        Command::Sim(a) => sim::run(&ctx, a),
        Command::Monitor(a) => monitor::run(&ctx, a),
        Command::Mitigate(a) => mitigate::run(&ctx, a),
        Command::Validate(a) => validate::run(&ctx, a),
        Command::Fit(a) => fit::run(&ctx, a),
        Command::Reference(a) => reference::run(&ctx, a),
    };
    match result {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::classify(&e).into()
        }
    }
}
