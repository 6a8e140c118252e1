use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _, Result};
use clap::Args;
use fidvr_core::grid::FeederNetwork;
use fidvr_core::mitigation::{
    apply_control_plan, build_controls, build_sensitivity_model, predict_total_change, report_operating_points,
    simulator_capacities, solve_mitigation_lp, target_requirement, uniform_ac_plan, AreaCapacity, ControlKind,
    LpStatus, MitigationConfig, PlannedControl, SensitivityModel,
};
use fidvr_core::monitor::{monitor_frames, AreaModel, DetectionConfig, EstimationConfig, MonitorReport};
use fidvr_core::pmu::{emit_mupmu_stream, format_sig9};
use fidvr_core::rdsm::census_file;
use fidvr_core::schema::check_version;
use fidvr_core::sim::{AreaSpec, FaultRecord, FaultScenario, SimConfig, SimulationResult, Simulator};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exit::Status;
use crate::files::{load_areas, load_network, load_params, parse_json, relative_to, Context};

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub suite: PathBuf,
    /// Overrides the suite's network file.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Overrides the suite's areas file.
    #[arg(long)]
    pub areas: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteScenario {
    pub name: String,
    pub fault: FaultRecord,
}

/// Control applied in one case of the control study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    /// The same share of A/C disconnected in every area.
    UniformAc { fraction: f64 },
    /// A share of A/C disconnected in the listed areas only.
    AreaAc { areas: Vec<String>, fraction: f64 },
    /// Every area's PV injects this share of its reactive limit.
    PvQ { fraction: f64 },
    /// Cheapest LP plan that shortens the overall estimate by `change_s`.
    Optimal { change_s: f64, use_pv: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlCase {
    pub name: String,
    pub action: ControlSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlStudy {
    pub fault: FaultRecord,
    #[serde(default)]
    pub mitigation: MitigationConfig,
    pub cases: Vec<ControlCase>,
}

/// Validation suite. Paths are relative to the suite file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    #[serde(default = "current_version")]
    pub format_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub areas: Option<PathBuf>,
    /// Sub-model parameters for the estimator; census parameters with
    /// measured feeder equivalents when absent.
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub scenarios: Vec<SuiteScenario>,
    #[serde(default)]
    pub control: Option<ControlStudy>,
}

fn current_version() -> u32 {
    fidvr_core::schema::FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub name: String,
    pub fault: FaultRecord,
    pub t_detect: Option<f64>,
    /// Simulated recovery, seconds after detection.
    pub actual_t_total_s: Option<f64>,
    pub estimated_t_total_s: Option<f64>,
    pub abs_error_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub name: String,
    pub action: ControlSpec,
    pub shed_ac_kw: f64,
    pub pv_q_kvar: f64,
    pub predicted_dt_s: Option<f64>,
    pub resimulated_dt_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub fault: FaultRecord,
    pub t_detect: Option<f64>,
    pub baseline_actual_s: Option<f64>,
    pub baseline_estimated_s: Option<f64>,
    pub cases: Vec<ControlRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suite: Option<String>,
    pub scenarios: Vec<ScenarioRow>,
    pub control: Option<ControlReport>,
}

impl ValidationReport {
    pub fn failures(&self) -> usize {
        let s = self.scenarios.iter().filter(|r| r.error.is_some()).count();
        let c = self.control.as_ref().map_or(0, |c| {
            usize::from(c.error.is_some()) + c.cases.iter().filter(|r| r.error.is_some()).count()
        });
        s + c
    }
}

struct Plant {
    net: FeederNetwork,
    sim: Simulator,
    models: BTreeMap<String, AreaModel>,
    caps: Vec<AreaCapacity>,
}

impl Plant {
    fn monitor(&self, r: &SimulationResult) -> Result<MonitorReport> {
        let frames = emit_mupmu_stream(r, self.sim.config().report_hz)?;
        Ok(monitor_frames(&frames, &self.models, &DetectionConfig::default(), &EstimationConfig::default())?)
    }

    fn model(&self, report: &MonitorReport, cfg: &MitigationConfig) -> Result<SensitivityModel> {
        let op = report_operating_points(report, &self.models)?;
        Ok(build_sensitivity_model(&self.net, &op, &report.recovery_estimate(), build_controls(&self.caps, cfg))?)
    }
}

/// Root voltage magnitude of every area over time.
fn voltage_csv(r: &SimulationResult) -> String {
    let mut out = String::from("t_s");
    for a in &r.areas {
        out += &format!(",{}_{}_v_pu", a.id, a.root);
    }
    out.push('\n');
    for (k, t) in r.times.iter().enumerate() {
        out += &format_sig9(*t);
        for a in &r.areas {
            out += &format!(",{}", format_sig9(a.v[k].norm()));
        }
        out.push('\n');
    }
    out
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig9).unwrap_or_default()
}

fn recovery_table(rows: &[ScenarioRow]) -> String {
    let mut out = String::from("name,bus,duration_ms,actual_t_total_s,estimated_t_total_s,abs_error_pct\n");
    for r in rows {
        out += &format!(
            "{},{},{},{},{},{}\n",
            r.name,
            r.fault.bus,
            format_sig9(r.fault.duration_s * 1e3),
            opt(r.actual_t_total_s),
            opt(r.estimated_t_total_s),
            opt(r.abs_error_pct)
        );
    }
    out
}

fn control_table(c: &ControlReport) -> String {
    let mut out = String::from("name,shed_ac_kw,pv_q_kvar,actual_dt_s,estimated_dt_s\n");
    for r in &c.cases {
        out += &format!(
            "{},{},{},{},{}\n",
            r.name,
            format_sig9(r.shed_ac_kw),
            format_sig9(r.pv_q_kvar),
            opt(r.resimulated_dt_s),
            opt(r.predicted_dt_s)
        );
    }
    out
}

fn scenario_row(plant: &Plant, s: &SuiteScenario) -> (ScenarioRow, Option<SimulationResult>) {
    let mut row = ScenarioRow {
        name: s.name.clone(),
        fault: s.fault,
        t_detect: None,
        actual_t_total_s: None,
        estimated_t_total_s: None,
        abs_error_pct: None,
        error: None,
    };
    let fault: FaultScenario = s.fault.into();
    let outcome = (|| -> Result<SimulationResult> {
        fault.validate()?;
        let r = plant.sim.run(Some(&fault), &[])?;
        if let Some(reason) = &r.collapsed {
            return Err(anyhow!("simulation collapsed: {reason}"));
        }
        let report = plant.monitor(&r)?;
        let event = report.event.as_ref().ok_or_else(|| anyhow!("no FIDVR event detected"))?;
        row.t_detect = Some(event.t_detect);
        row.estimated_t_total_s = report.t_total;
        row.actual_t_total_s = r.recovery_time().map(|t| t + fault.clear_time() - event.t_detect);
        match (row.estimated_t_total_s, row.actual_t_total_s) {
            (Some(e), Some(a)) => row.abs_error_pct = Some(100.0 * (e - a).abs() / a),
            (None, _) => return Err(anyhow!("no recovery estimate")),
            (_, None) => return Err(anyhow!("no recovery within the horizon")),
        }
        Ok(r)
    })();
    match outcome {
        Ok(r) => (row, Some(r)),
        Err(e) => {
            row.error = Some(format!("{e:#}"));
            (row, None)
        }
    }
}

/// Model control vector for a plan, summing amounts per area and kind.
fn control_vector(model: &SensitivityModel, plan: &[PlannedControl]) -> Vec<f64> {
    model
        .controls
        .iter()
        .map(|c| {
            plan.iter()
                .filter(|p| p.area == c.area && p.kind == c.kind)
                .map(|p| p.amount)
                .sum()
        })
        .collect()
}

fn case_plan(plant: &Plant, report: &MonitorReport, cfg: &MitigationConfig, spec: &ControlSpec) -> Result<Vec<PlannedControl>> {
    Ok(match spec {
        ControlSpec::UniformAc { fraction } => uniform_ac_plan(&plant.caps, *fraction),
        ControlSpec::AreaAc { areas, fraction } => {
            for id in areas {
                if !plant.caps.iter().any(|c| &c.area == id) {
                    return Err(anyhow!("unknown area {id}"));
                }
            }
            uniform_ac_plan(&plant.caps, *fraction)
                .into_iter()
                .filter(|p| areas.contains(&p.area))
                .collect()
        }
        ControlSpec::PvQ { fraction } => plant
            .caps
            .iter()
            .map(|c| PlannedControl {
                area: c.area.clone(),
                kind: ControlKind::PvQInject,
                amount: fraction * c.pv_q_max_kvar,
            })
            .collect(),
        ControlSpec::Optimal { change_s, use_pv } => {
            let cfg = MitigationConfig { use_pv: *use_pv, ..*cfg };
            let model = plant.model(report, &cfg)?;
            let req = target_requirement(&model, &report.recovery_estimate(), *change_s)?;
            let plan = solve_mitigation_lp(&model, &req)?;
            if plan.lp_status == LpStatus::Infeasible {
                return Err(anyhow!(fidvr_core::Error::Infeasible {
                    max_achievable: plan.max_achievable_dt.unwrap_or_default().into_values().collect()
                }));
            }
            plan.plan
        }
    })
}

fn control_study(plant: &Plant, study: &ControlStudy) -> (ControlReport, Vec<(String, SimulationResult)>) {
    let mut report = ControlReport {
        fault: study.fault,
        t_detect: None,
        baseline_actual_s: None,
        baseline_estimated_s: None,
        cases: Vec::new(),
        error: None,
    };
    let fault: FaultScenario = study.fault.into();
    let base = (|| -> Result<(SimulationResult, MonitorReport, f64, f64)> {
        fault.validate()?;
        let r = plant.sim.run(Some(&fault), &[])?;
        let mon = plant.monitor(&r)?;
        let t_detect = mon.event.as_ref().ok_or_else(|| anyhow!("no FIDVR event detected"))?.t_detect;
        let rec = r.recovery_time().ok_or_else(|| anyhow!("no recovery within the horizon"))?;
        Ok((r, mon, t_detect, rec))
    })();
    let (base_run, mon, t_detect, base_rec) = match base {
        Ok(b) => b,
        Err(e) => {
            report.error = Some(format!("{e:#}"));
            return (report, Vec::new());
        }
    };
    report.t_detect = Some(t_detect);
    report.baseline_actual_s = Some(base_rec + fault.clear_time() - t_detect);
    report.baseline_estimated_s = mon.t_total;
    let cfg = study.mitigation;
    let full = plant.model(&mon, &MitigationConfig { use_pv: true, ..cfg });

    let rows: Vec<(ControlRow, Option<SimulationResult>)> = study
        .cases
        .par_iter()
        .map(|case| {
            let mut row = ControlRow {
                name: case.name.clone(),
                action: case.action.clone(),
                shed_ac_kw: 0.0,
                pv_q_kvar: 0.0,
                predicted_dt_s: None,
                resimulated_dt_s: None,
                error: None,
            };
            let outcome = (|| -> Result<SimulationResult> {
                let plan = case_plan(plant, &mon, &cfg, &case.action)?;
                let total = |k| plan.iter().filter(|p| p.kind == k).fold(0.0, |acc, p| acc + p.amount);
                row.shed_ac_kw = total(ControlKind::AcDisconnect);
                row.pv_q_kvar = total(ControlKind::PvQInject);
                let model = full.as_ref().map_err(|e| anyhow!("sensitivity model: {e:#}"))?;
                row.predicted_dt_s =
                    Some(predict_total_change(model, &mon.recovery_estimate(), &control_vector(model, &plan))?);
                let r = apply_control_plan(&plant.sim, &fault, &plan, t_detect, cfg.delay_s)?;
                row.resimulated_dt_s = r.recovery_time().map(|t| t - base_rec);
                if row.resimulated_dt_s.is_none() {
                    return Err(anyhow!("controlled run does not recover within the horizon"));
                }
                Ok(r)
            })();
            match outcome {
                Ok(r) => (row, Some(r)),
                Err(e) => {
                    row.error = Some(format!("{e:#}"));
                    (row, None)
                }
            }
        })
        .collect();
    let mut runs = vec![("baseline".to_string(), base_run)];
    for (row, r) in rows {
        if let Some(r) = r {
            runs.push((row.name.clone(), r));
        }
        report.cases.push(row);
    }
    (report, runs)
}

fn resolve(flag: &Option<PathBuf>, field: &Option<PathBuf>, suite: &Path, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| field.as_ref().map(|p| relative_to(suite, p)))
        .ok_or_else(|| anyhow!(fidvr_core::Error::InvalidInput(format!("suite names no {what} file"))))
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn run(ctx: &Context, args: &ValidateArgs) -> Result<Status> {
    let bytes = std::fs::read(&args.suite).with_context(|| format!("reading suite file {}", args.suite.display()))?;
    let suite: SuiteFile = parse_json(&bytes, "suite", &args.suite)?;
    check_version("suite file", suite.format_version)?;
    let cfg = SimConfig {
        seed: ctx.seed.unwrap_or(suite.sim.seed),
        ..suite.sim
    };
    let mut run = ctx.run("validate", Some(cfg.seed))?;
    run.input("suite", &args.suite)?;
    let mut report = ValidationReport {
        suite: suite.name.clone(),
        ..ValidationReport::default()
    };

    if !suite.scenarios.is_empty() || suite.control.is_some() {
        let net = load_network(&mut run, &resolve(&args.network, &suite.network, &args.suite, "network")?)?;
        let areas: Vec<AreaSpec> = load_areas(&mut run, &resolve(&args.areas, &suite.areas, &args.suite, "areas")?)?;
        let sim = Simulator::new(&net, &areas, cfg)?;
        let models = match &suite.params {
            Some(p) => load_params(&mut run, &relative_to(&args.suite, p))?.models(),
            None => census_file(&sim)?.models(),
        };
        let caps = simulator_capacities(&sim);
        let plant = Plant { net, sim, models, caps };

        let rows: Vec<_> = run.time("scenarios", || suite.scenarios.par_iter().map(|s| scenario_row(&plant, s)).collect());
        for (row, r) in rows {
            if let Some(r) = r {
                run.output("plot", &format!("plots/scenario_{}.csv", file_stem(&row.name)), voltage_csv(&r).as_bytes())?;
            }
            report.scenarios.push(row);
        }
        if let Some(study) = &suite.control {
            let (c, runs) = run.time("control", || control_study(&plant, study));
            for (name, r) in runs {
                run.output("plot", &format!("plots/control_{}.csv", file_stem(&name)), voltage_csv(&r).as_bytes())?;
            }
            run.output("table", "control_table.csv", control_table(&c).as_bytes())?;
            report.control = Some(c);
        }
    }
    run.output("table", "recovery_table.csv", recovery_table(&report.scenarios).as_bytes())?;
    run.output_json("report", "validation.json", &report)?;
    run.finish()?;

    for r in &report.scenarios {
        match (&r.error, r.abs_error_pct) {
            (Some(e), _) => println!("{}: {e}", r.name),
            (None, Some(p)) => println!(
                "{}: actual {:.2} s, estimated {:.2} s, error {p:.1}%",
                r.name,
                r.actual_t_total_s.unwrap_or(f64::NAN),
                r.estimated_t_total_s.unwrap_or(f64::NAN)
            ),
            _ => {}
        }
    }
    if let Some(c) = &report.control {
        for r in &c.cases {
            match &r.error {
                Some(e) => println!("{}: {e}", r.name),
                None => println!(
                    "{}: {:.1} kW A/C, {:.1} kvar PV, predicted {:.2} s, re-simulated {:.2} s",
                    r.name,
                    r.shed_ac_kw,
                    r.pv_q_kvar,
                    r.predicted_dt_s.unwrap_or(f64::NAN),
                    r.resimulated_dt_s.unwrap_or(f64::NAN)
                ),
            }
        }
    }
    let failures = report.failures();
    if failures > 0 {
        eprintln!("{failures} case(s) failed; see validation.json");
        return Ok(Status::Numerical);
    }
    Ok(Status::Success)
}
