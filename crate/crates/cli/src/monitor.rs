use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::Args;
use fidvr_core::monitor::{monitor_frames, DetectionConfig, EstimationConfig};
use fidvr_core::pmu::read_csv;

use crate::exit::Status;
use crate::files::{load_params, Context};

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// μPMU stream in the `sim` CSV layout.
    #[arg(long)]
    pub csv: PathBuf,
    /// Sub-model parameter file (fitted or census).
    #[arg(long)]
    pub params: PathBuf,
    /// Recovery voltage used by the estimate, p.u.
    #[arg(long, default_value_t = 0.95)]
    pub v_rec: f64,
    /// Relative susceptance jump that flags a stall.
    #[arg(long)]
    pub jump_ratio: Option<f64>,
}

pub fn run(ctx: &Context, args: &MonitorArgs) -> Result<Status> {
    let mut run = ctx.run("monitor", ctx.seed)?;
    let bytes = run.input("stream", &args.csv)?;
    let frames = read_csv(BufReader::new(bytes.as_slice())).with_context(|| format!("invalid stream {}", args.csv.display()))?;
    let params = load_params(&mut run, &args.params)?;
    let models = params.models();
    let mut detection = DetectionConfig::default();
    if let Some(r) = args.jump_ratio {
        detection.jump_ratio = r;
    }
    let estimation = EstimationConfig {
        v_recovery: args.v_rec,
        ..EstimationConfig::default()
    };
    let report = run.time("monitor", || monitor_frames(&frames, &models, &detection, &estimation))?;
    run.output_json("report", "monitor.json", &report)?;
    run.finish()?;

    match (&report.event, report.t_total) {
        (None, _) => println!("no FIDVR event"),
        (Some(ev), Some(t)) => println!(
            "FIDVR detected at {:.2} s in {} area(s); estimated recovery {t:.2} s after detection",
            ev.t_detect,
            ev.areas.len()
        ),
        (Some(ev), None) => println!("FIDVR detected at {:.2} s; no recovery estimate", ev.t_detect),
    }
    for f in &report.flags {
        log::warn!("{f}");
    }
    Ok(Status::Success)
}
