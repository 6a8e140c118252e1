use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::Args;
use fidvr_core::rdsm::{
    evaluate_fit, fit_rdsm, generate_surrogate_dataset, ChannelNrmse, FitConfig, ScenarioSweepSpec, StartSummary,
};
use fidvr_core::schema::check_version;
use fidvr_core::sim::SimConfig;
use serde::{Deserialize, Serialize};

use crate::exit::Status;
use crate::files::{load_areas, load_network, parse_json, Context};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep file: training scenarios, fit settings and an optional
    /// held-out sweep.
    #[arg(long)]
    pub sweep: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub areas: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(default = "current_version")]
    pub format_version: u32,
    pub sweep: ScenarioSweepSpec,
    #[serde(default)]
    pub holdout: Option<ScenarioSweepSpec>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub sim: SimConfig,
}

fn current_version() -> u32 {
    fidvr_core::schema::FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaFitReport {
    pub area: String,
    pub eta: Option<f64>,
    pub zip_baseline_eta: Option<f64>,
    pub training_nrmse: Option<ChannelNrmse>,
    /// Worst channel error per held-out scenario.
    pub holdout_nrmse: Vec<ChannelNrmse>,
    pub stall_identified: Option<bool>,
    pub best_start: Option<usize>,
    pub starts: Vec<StartSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub seed: u64,
    pub sweep: ScenarioSweepSpec,
    pub holdout: Option<ScenarioSweepSpec>,
    pub areas: Vec<AreaFitReport>,
}

pub fn run(ctx: &Context, args: &FitArgs) -> Result<Status> {
    let bytes = std::fs::read(&args.sweep).with_context(|| format!("reading sweep file {}", args.sweep.display()))?;
    let file: SweepFile = parse_json(&bytes, "sweep", &args.sweep)?;
    check_version("sweep file", file.format_version)?;
    let seed = ctx.seed.unwrap_or(file.fit.seed);
    let sim = SimConfig { seed: ctx.seed.unwrap_or(file.sim.seed), ..file.sim };
    let fit = FitConfig { seed, ..file.fit.clone() };
    let sweep = ScenarioSweepSpec { seed: ctx.seed.unwrap_or(file.sweep.seed), ..file.sweep.clone() };

    let mut run = ctx.run("fit", Some(seed))?;
    run.input("sweep", &args.sweep)?;
    let net = load_network(&mut run, &args.network)?;
    let areas = load_areas(&mut run, &args.areas)?;

    let (params, results) = run.time("fit", || fit_rdsm(&net, &areas, &sim, &sweep, &fit))?;
    let holdout = match &file.holdout {
        Some(h) => Some(run.time("holdout", || generate_surrogate_dataset(&net, &areas, &sim, h))?),
        None => None,
    };

    let mut report = FitReport {
        seed,
        sweep,
        holdout: file.holdout.clone(),
        areas: Vec::new(),
    };
    let mut failed = false;
    for spec in &areas {
        let mut row = AreaFitReport {
            area: spec.id.clone(),
            eta: None,
            zip_baseline_eta: None,
            training_nrmse: None,
            holdout_nrmse: Vec::new(),
            stall_identified: None,
            best_start: None,
            starts: Vec::new(),
            error: None,
        };
        match results.get(&spec.id) {
            Some(Ok(r)) => {
                row.eta = Some(r.eta);
                row.zip_baseline_eta = Some(r.zip_baseline_eta);
                row.training_nrmse = Some(r.nrmse);
                row.stall_identified = Some(r.stall_identified);
                row.best_start = Some(r.best_start);
                row.starts = r.starts.clone();
                if !r.stall_identified {
                    failed = true;
                    row.error = Some("no training record stalled; stall parameters kept at their prior".into());
                }
                if let Some(ds) = &holdout {
                    let records: Vec<_> = ds
                        .scenarios
                        .iter()
                        .filter(|s| s.fault.is_some())
                        .filter_map(|s| s.area(&spec.id).cloned())
                        .collect();
                    match evaluate_fit(&r.params, &records, ds.dt, ds.base_mva, ds.pq_low_voltage) {
                        Ok(n) => row.holdout_nrmse = n,
                        Err(e) => row.error = Some(format!("held-out evaluation: {e}")),
                    }
                }
            }
            Some(Err(e)) => {
                failed = true;
                row.error = Some(e.to_string());
            }
            None => {
                failed = true;
                row.error = Some("area was not fitted".into());
            }
        }
        report.areas.push(row);
    }

    run.output("params", "fitted_params.json", params.to_json()?.as_bytes())?;
    run.output_json("report", "fit_report.json", &report)?;
    run.finish()?;

    let mut lines: BTreeMap<&str, String> = BTreeMap::new();
    for a in &report.areas {
        let line = match (&a.training_nrmse, &a.error) {
            (Some(n), None) => format!("NRMSE P {:.2}% Q {:.2}%", 100.0 * n.p, 100.0 * n.q),
            (_, Some(e)) => e.clone(),
            (None, None) => String::new(),
        };
        lines.insert(&a.area, line);
    }
    for (id, line) in lines {
        println!("{id}: {line}");
    }
    Ok(if failed { Status::Infeasible } else { Status::Success })
}
