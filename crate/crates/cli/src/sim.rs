use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::Args;
use fidvr_core::pmu::{emit_mupmu_stream, format_sig9, write_csv};
use fidvr_core::schema::check_version;
use fidvr_core::sim::{ControlAction, FaultRecord, FaultScenario, ScenarioFile, SimConfig, SimulationResult, Simulator};
use serde::Serialize;

use crate::exit::Status;
use crate::files::{load_areas, load_network, parse_json, Context};
use crate::mitigate::PlanOutput;

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub areas: PathBuf,
    /// μPMU reporting rate in Hz; defaults to the scenario's report rate.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Plan file from `mitigate` whose actions are applied during the run.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct AreaSummary {
    id: String,
    root: u32,
    ac_kw: f64,
    peak_stalled_kw: f64,
    min_voltage_pu: f64,
}

#[derive(Debug, Serialize)]
struct SimSummary {
    name: Option<String>,
    seed: u64,
    fault: FaultRecord,
    controls: Vec<ControlAction>,
    /// Seconds from fault clearing until every root stays above the
    /// recovery voltage.
    recovery_time_s: Option<f64>,
    collapsed: Option<String>,
    areas: Vec<AreaSummary>,
}

/// Reported time series: per-area root voltage, stalled and connected
/// A/C, the lowest root voltage and any recorded bus voltages.
pub fn states_csv(r: &SimulationResult) -> String {
    let mut out = String::from("t_s");
    for a in &r.areas {
        out += &format!(",{0}_v_pu,{0}_stalled_kw", a.id);
    }
    out += ",min_root_v_pu";
    for b in &r.bus_ids {
        out += &format!(",bus{b}_v_pu");
    }
    out.push('\n');
    for (k, t) in r.times.iter().enumerate() {
        out += &format_sig9(*t);
        let mut lowest = f64::INFINITY;
        for a in &r.areas {
            let v = a.v[k].norm();
            lowest = lowest.min(v);
            out += &format!(",{},{}", format_sig9(v), format_sig9(a.stalled_kw[k]));
        }
        out += &format!(",{}", format_sig9(lowest));
        if let Some(row) = r.bus_voltages.get(k) {
            for v in row {
                out += &format!(",{}", format_sig9(*v));
            }
        }
        out.push('\n');
    }
    out
}

fn summary(name: Option<String>, fault: FaultScenario, controls: Vec<ControlAction>, r: &SimulationResult) -> SimSummary {
    SimSummary {
        name,
        seed: r.seed,
        fault: fault.into(),
        controls,
        recovery_time_s: r.recovery_time(),
        collapsed: r.collapsed.clone(),
        areas: r
            .areas
            .iter()
            .map(|a| AreaSummary {
                id: a.id.clone(),
                root: a.root,
                ac_kw: a.ac_kw,
                peak_stalled_kw: a.stalled_kw.iter().copied().fold(0.0, f64::max),
                min_voltage_pu: a.v.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min),
            })
            .collect(),
    }
}

pub fn run(ctx: &Context, args: &SimArgs) -> Result<Status> {
    let bytes = std::fs::read(&args.scenario).with_context(|| format!("reading scenario file {}", args.scenario.display()))?;
    let scenario: ScenarioFile = parse_json(&bytes, "scenario", &args.scenario)?;
    check_version("scenario file", scenario.format_version)?;
    let cfg = SimConfig {
        seed: ctx.seed.unwrap_or(scenario.sim.seed),
        ..scenario.sim
    };
    let mut run = ctx.run("sim", Some(cfg.seed))?;
    run.input("scenario", &args.scenario)?;
    let net = load_network(&mut run, &args.network)?;
    let areas = scenario.apply_overrides(&load_areas(&mut run, &args.areas)?)?;
    let controls = match &args.plan {
        Some(p) => {
            let bytes = run.input("plan", p)?;
            parse_json::<PlanOutput>(&bytes, "plan", p)?.actions
        }
        None => Vec::new(),
    };
    let fault: FaultScenario = scenario.fault.into();
    fault.validate()?;

    let sim = Simulator::new(&net, &areas, cfg)?;
    let result = run.time("simulate", || sim.run(Some(&fault), &controls))?;
    let frames = emit_mupmu_stream(&result, args.rate.unwrap_or(cfg.report_hz))?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &frames)?;
    run.output("mupmu", "mupmu.csv", &csv)?;
    run.output("states", "states.csv", states_csv(&result).as_bytes())?;
    let s = summary(scenario.name.clone(), fault, controls, &result);
    run.output_json("summary", "sim_summary.json", &s)?;
    run.finish()?;

    if let Some(reason) = &result.collapsed {
        eprintln!("error: simulation collapsed: {reason}");
        return Ok(Status::Numerical);
    }
    match s.recovery_time_s {
        Some(t) => println!("recovered {t:.3} s after clearing"),
        None => println!("did not recover to {} p.u. within the horizon", result.v_recovery),
    }
    Ok(Status::Success)
}
