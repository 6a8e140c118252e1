use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use fidvr_core::mitigation::{plan_actions, plan_for_report, AreaCapacity, ControlKind, LpStatus, MitigationConfig, MitigationPlan};
use fidvr_core::monitor::MonitorReport;
use fidvr_core::sim::ControlAction;
use serde::{Deserialize, Serialize};

use crate::exit::Status;
use crate::files::{load_network, load_params, parse_json, Context};

#[derive(Debug, Args)]
pub struct MitigateArgs {
    /// Report written by `monitor`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    /// Sub-model parameter file used for the report.
    #[arg(long)]
    pub params: PathBuf,
    /// Required recovery time after detection, s.
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    /// Recovery voltage of the criterion, p.u.
    #[arg(long, default_value_t = 0.95)]
    pub v_rec: f64,
    /// Largest share of an area's A/C that may be disconnected.
    #[arg(long, default_value_t = 0.5)]
    pub ac_cap: f64,
    /// Leave PV inverters at unity power factor.
    #[arg(long)]
    pub no_pv: bool,
    /// Actuation delay after detection, s.
    #[arg(long, default_value_t = 1.5)]
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub v_rec: f64,
    pub t_max_s: f64,
}

/// Output of `mitigate`; `sim --plan` replays its actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutput {
    pub criterion: Criterion,
    pub t_detect: f64,
    pub t_estimate: Option<f64>,
    pub shed_ac_kw: f64,
    pub pv_q_kvar: f64,
    pub plan: MitigationPlan,
    /// Simulator actions at detection plus the actuation delay; empty when
    /// nothing needs to be done.
    pub actions: Vec<ControlAction>,
}

pub fn run(ctx: &Context, args: &MitigateArgs) -> Result<Status> {
    let mut run = ctx.run("mitigate", ctx.seed)?;
    let bytes = run.input("report", &args.report)?;
    let report: MonitorReport = parse_json(&bytes, "monitor report", &args.report)?;
    let net = load_network(&mut run, &args.network)?;
    let params = load_params(&mut run, &args.params)?;
    let models = params.models();
    let Some(event) = &report.event else {
        bail!(fidvr_core::Error::InvalidInput("monitor report contains no FIDVR event".into()));
    };
    let report = if report.estimates.values().any(|e| e.v_recovery != args.v_rec) {
        report.with_recovery_voltage(&models, args.v_rec)?
    } else {
        report.clone()
    };
    let caps: Vec<AreaCapacity> = params.areas.iter().map(AreaCapacity::from).collect();
    let cfg = MitigationConfig {
        t_criterion_s: args.t_max,
        ac_cap_frac: args.ac_cap,
        use_pv: !args.no_pv,
        delay_s: args.delay,
        ..MitigationConfig::default()
    };
    let (_, plan) = run.time("sensitivity_lp", || plan_for_report(&net, &report, &models, &caps, &cfg))?;
    let out = PlanOutput {
        criterion: Criterion {
            v_rec: args.v_rec,
            t_max_s: args.t_max,
        },
        t_detect: event.t_detect,
        t_estimate: report.t_total,
        shed_ac_kw: plan.total(ControlKind::AcDisconnect),
        pv_q_kvar: plan.total(ControlKind::PvQInject),
        actions: plan_actions(&plan.plan, event.t_detect + args.delay),
        plan,
    };
    run.output_json("plan", "plan.json", &out)?;
    run.finish()?;

    if out.plan.lp_status == LpStatus::Infeasible {
        eprintln!("error: the criterion cannot be met within the control limits");
        if let Some(best) = &out.plan.max_achievable_dt {
            for (area, dt) in best {
                eprintln!("  {area}: best achievable change {dt:.3} s");
            }
        }
        return Ok(Status::Infeasible);
    }
    if out.actions.is_empty() {
        println!("estimated recovery meets the criterion; no control needed");
    } else {
        println!(
            "plan: disconnect {:.1} kW of A/C, inject {:.1} kvar from PV",
            out.shed_ac_kw, out.pv_q_kvar
        );
    }
    Ok(Status::Success)
}
