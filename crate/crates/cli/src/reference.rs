use anyhow::Result;
use clap::Args;
use fidvr_core::mitigation::MitigationConfig;
use fidvr_core::rdsm::{census_file, FitConfig, ScenarioSweepSpec};
use fidvr_core::reference;
use fidvr_core::schema::FORMAT_VERSION;
use fidvr_core::sim::{AreasFile, FaultRecord, ScenarioFile, SimConfig, Simulator};

use crate::exit::Status;
use crate::files::Context;
use crate::fit::SweepFile;
use crate::validate::{ControlCase, ControlSpec, ControlStudy, SuiteFile, SuiteScenario};

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    /// Skip the census parameter file, which needs a few power flows.
    #[arg(long)]
    pub no_params: bool,
}

fn scenario_name(f: &FaultRecord) -> String {
    format!("fault_{}_{}ms", f.bus, (f.duration_s * 1e3).round())
}

fn case(name: &str, action: ControlSpec) -> ControlCase {
    ControlCase { name: name.into(), action }
}

/// Validation suite over the reference faults with the control study on
/// the fault inside A5.
pub fn reference_suite() -> SuiteFile {
    use ControlSpec::*;
    SuiteFile {
        format_version: FORMAT_VERSION,
        name: Some("reference".into()),
        network: Some("network.json".into()),
        areas: Some("areas.json".into()),
        params: None,
        sim: SimConfig::default(),
        scenarios: reference::fault_suite()
            .into_iter()
            .map(|f| {
                let fault = FaultRecord::from(f);
                SuiteScenario { name: scenario_name(&fault), fault }
            })
            .collect(),
        control: Some(ControlStudy {
            fault: reference::control_fault().into(),
            mitigation: MitigationConfig::default(),
            cases: vec![
                case("ac_uniform_10", UniformAc { fraction: 0.1 }),
                case("ac_uniform_20", UniformAc { fraction: 0.2 }),
                case("ac_uniform_30", UniformAc { fraction: 0.3 }),
                case("ac_a5_30", AreaAc { areas: vec!["A5".into()], fraction: 0.3 }),
                case("pv_q_50", PvQ { fraction: 0.5 }),
                case("optimal_ac_2s", Optimal { change_s: -2.0, use_pv: false }),
                case("optimal_pv_2s", Optimal { change_s: -2.0, use_pv: true }),
            ],
        }),
    }
}

/// Training sweep over two fault locations and durations, held out on a
/// third location, duration and fault depth.
pub fn reference_sweep() -> SweepFile {
    SweepFile {
        format_version: FORMAT_VERSION,
        sweep: ScenarioSweepSpec {
            fault_shunts: vec![reference::FAULT_G],
            durations_s: vec![0.05, 0.08],
            buses: vec![701, 709],
            start_s: 1.0,
            seed: 0,
            include_no_fault: false,
        },
        holdout: Some(ScenarioSweepSpec {
            fault_shunts: vec![35.0],
            durations_s: vec![0.065],
            buses: vec![703],
            start_s: 1.0,
            seed: 0,
            include_no_fault: false,
        }),
        fit: FitConfig::default(),
        sim: SimConfig::default(),
    }
}

pub fn run(ctx: &Context, args: &ReferenceArgs) -> Result<Status> {
    let mut run = ctx.run("reference", ctx.seed)?;
    let net = reference::network();
    let areas = reference::areas();
    let mut spec = net.to_file_spec();
    spec.name = Some("ieee37-positive-sequence".into());
    run.output_json("network", "network.json", &spec)?;
    run.output_json(
        "areas",
        "areas.json",
        &AreasFile { format_version: FORMAT_VERSION, areas: areas.clone() },
    )?;
    for f in reference::fault_suite() {
        let fault = FaultRecord::from(f);
        let name = scenario_name(&fault);
        let file = ScenarioFile {
            format_version: FORMAT_VERSION,
            name: Some(name.clone()),
            fault,
            sim: SimConfig::default(),
            areas: Vec::new(),
        };
        run.output_json("scenario", &format!("scenarios/{name}.json"), &file)?;
    }
    run.output_json("sweep", "sweep.json", &reference_sweep())?;
    run.output_json("suite", "suite.json", &reference_suite())?;
    if !args.no_params {
        let sim = Simulator::new(&net, &areas, SimConfig::default())?;
        let params = run.time("census", || census_file(&sim))?;
        run.output("params", "params_census.json", params.to_json()?.as_bytes())?;
    }
    let dir = run.out_dir().display().to_string();
    run.finish()?;
    println!("reference data written to {dir}");
    Ok(Status::Success)
}
