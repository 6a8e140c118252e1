//! Linearised recovery-time sensitivities and the minimum-cost control plan.
//!
//! Per area, the recovery time depends on the load-point voltage through the
//! closed-form `t1` and `t2`. Their voltage derivatives times the voltage
//! sensitivities to each control give a matrix `A` with
//! `Δt ≈ A Δu`; a small LP then picks the cheapest `Δu` that meets the
//! required improvement in every area.

mod lp;
mod sensitivity;

use std::collections::BTreeMap;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FeederNetwork;
use crate::load::Motor1PhaseParameters;
use crate::monitor::{flat_window_phasors, AreaModel, FidvrEvent, MonitorReport, RecoveryEstimate};
use crate::pmu::AreaStream;
use crate::rdsm::SubModelParameters;
use crate::sim::{ControlAction, FaultScenario, SimulationResult, Simulator};

pub use lp::{solve_bounded_lp, LpSolution, LpStatus};
pub use sensitivity::{
    build_reduced_network, compute_voltage_control_sensitivities, AreaOperatingPoint, ReducedNetwork,
};

/// `(dt1/dV, dt2/dV)` at `v_l`, both negative.
pub fn compute_time_voltage_derivatives(
    v_l: f64,
    v_recovery: f64,
    p: &Motor1PhaseParameters,
) -> Result<(f64, f64)> {
    let g = p.g_stall();
    let a = p.theta1 / (v_l * v_l * g);
    if !(a < 1.0) || !(v_l > 0.0) {
        return Err(Error::NeverTrips(format!("v_l = {v_l:.4} does not heat past theta1")));
    }
    let dt1 = -2.0 * p.t_th * a / (v_l * (1.0 - a));
    let den = (v_l * v_l + v_recovery * v_recovery) * g - p.theta1 - p.theta2;
    if !(den > 0.0) {
        return Err(Error::NoRecoveryEstimate(format!("trip band is not crossed at v_l = {v_l:.4}")));
    }
    let dt2 = -2.0 * p.t_th * (p.theta2 - p.theta1) * 2.0 * v_l * g / (den * den);
    Ok((dt1, dt2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    /// Disconnect A/C units, kW of motor base.
    AcDisconnect,
    /// Reactive injection from PV inverters, kvar.
    PvQInject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVariable {
    pub area: String,
    pub kind: ControlKind,
    /// Upper bound; the lower bound is always zero.
    pub bound: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MitigationConfig {
    /// Recovery requirement, seconds after detection.
    pub t_criterion_s: f64,
    /// Largest share of an area's A/C that may be disconnected.
    pub ac_cap_frac: f64,
    pub cost_ac_per_kw: f64,
    pub cost_pv_per_kvar: f64,
    pub use_pv: bool,
    /// Actuation delay after detection.
    pub delay_s: f64,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self {
            t_criterion_s: 10.0,
            ac_cap_frac: 0.5,
            cost_ac_per_kw: 1.0,
            cost_pv_per_kvar: 0.01,
            use_pv: true,
            delay_s: 1.5,
        }
    }
}

/// Control capacity of one area.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaCapacity {
    pub area: String,
    /// Connected A/C motor base, kW.
    pub ac_kw: f64,
    /// Inverter reactive limit, kvar.
    pub pv_q_max_kvar: f64,
}

impl From<&SubModelParameters> for AreaCapacity {
    fn from(p: &SubModelParameters) -> Self {
        Self {
            area: p.area.clone(),
            ac_kw: p.ac_kw(),
            pv_q_max_kvar: p.load_model().pv_q_max_kvar(),
        }
    }
}

/// Capacities of every area in the simulator.
pub fn simulator_capacities(sim: &Simulator) -> Vec<AreaCapacity> {
    sim.area_specs()
        .enumerate()
        .map(|(k, s)| AreaCapacity {
            area: s.id.clone(),
            ac_kw: sim.area_ac_kw(k),
            pv_q_max_kvar: sim.area_pv_q_max(k),
        })
        .collect()
}

/// A/C controls for every area, then PV controls for areas with inverters
/// when enabled. A/C bounds are the configured share of the connected base.
pub fn build_controls(areas: &[AreaCapacity], cfg: &MitigationConfig) -> Vec<ControlVariable> {
    let ac = areas.iter().map(|a| ControlVariable {
        area: a.area.clone(),
        kind: ControlKind::AcDisconnect,
        bound: cfg.ac_cap_frac * a.ac_kw,
        cost: cfg.cost_ac_per_kw,
    });
    let pv = areas
        .iter()
        .filter(|a| cfg.use_pv && a.pv_q_max_kvar > 0.0)
        .map(|a| ControlVariable {
            area: a.area.clone(),
            kind: ControlKind::PvQInject,
            bound: a.pv_q_max_kvar,
            cost: cfg.cost_pv_per_kvar,
        });
    ac.chain(pv).collect()
}

/// Disconnects `frac` of every area's A/C base; no PV support.
pub fn uniform_ac_plan(areas: &[AreaCapacity], frac: f64) -> Vec<PlannedControl> {
    areas
        .iter()
        .map(|a| PlannedControl {
            area: a.area.clone(),
            kind: ControlKind::AcDisconnect,
            amount: frac * a.ac_kw,
        })
        .collect()
}

/// Linear map from controls to per-area recovery-time change.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityModel {
    pub areas: Vec<String>,
    pub controls: Vec<ControlVariable>,
    pub d_t1_v: Vec<f64>,
    pub d_t2_v: Vec<f64>,
    /// `∂|V_L| / ∂u`, areas × controls.
    pub s_v_u: DMatrix<f64>,
    /// `∂t / ∂u` in seconds per control unit, areas × controls.
    pub a: DMatrix<f64>,
}

/// `A = diag(dt1/dV + dt2/dV) S`. Positive entries contradict the physics
/// (more support never slows recovery) and are clamped to zero.
pub fn assemble_a(d_t1_v: &[f64], d_t2_v: &[f64], s_v_u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if d_t1_v.len() != s_v_u.nrows() || d_t2_v.len() != s_v_u.nrows() {
        return Err(Error::invalid(format!(
            "derivative vectors ({}, {}) do not match {} sensitivity rows",
            d_t1_v.len(),
            d_t2_v.len(),
            s_v_u.nrows()
        )));
    }
    let mut a = s_v_u.clone();
    for i in 0..a.nrows() {
        let d = d_t1_v[i] + d_t2_v[i];
        for j in 0..a.ncols() {
            let v = d * s_v_u[(i, j)];
            a[(i, j)] = if v > 0.0 {
                warn!("positive recovery-time sensitivity {v:.3e} at ({i}, {j}) clamped to zero");
                0.0
            } else {
                v
            };
        }
    }
    Ok(a)
}

/// Operating point of every modelled area, averaged over the flat window
/// after detection.
pub fn operating_points(
    streams: &[AreaStream],
    event: &FidvrEvent,
    models: &BTreeMap<String, AreaModel>,
    window: f64,
) -> Result<Vec<AreaOperatingPoint>> {
    let mut out = Vec::new();
    for s in streams {
        let Some(m) = models.get(&s.area) else {
            continue;
        };
        let (v_root, i) = flat_window_phasors(s, event.t_detect, window)
            .ok_or_else(|| Error::invalid(format!("area {}: no usable samples after detection", s.area)))?;
        out.push(AreaOperatingPoint {
            area: s.area.clone(),
            root: s.node,
            v_root,
            i,
            feeder_z: m.feeder_z,
            motor1: m.motor1,
        });
    }
    Ok(out)
}

/// Operating points from the phasors stored in a monitor report.
pub fn report_operating_points(
    report: &MonitorReport,
    models: &BTreeMap<String, AreaModel>,
) -> Result<Vec<AreaOperatingPoint>> {
    report
        .operating_point
        .iter()
        .filter_map(|(id, ph)| models.get(id).map(|m| (id, ph, m)))
        .map(|(id, ph, m)| {
            Ok(AreaOperatingPoint {
                area: id.clone(),
                root: ph.node,
                v_root: ph.v,
                i: ph.i,
                feeder_z: m.feeder_z,
                motor1: m.motor1,
            })
        })
        .collect()
}

/// Sensitivity model and plan for a monitored event under the uniform
/// per-area requirement.
pub fn plan_for_report(
    net: &FeederNetwork,
    report: &MonitorReport,
    models: &BTreeMap<String, AreaModel>,
    capacities: &[AreaCapacity],
    cfg: &MitigationConfig,
) -> Result<(SensitivityModel, MitigationPlan)> {
    if report.event.is_none() {
        return Err(Error::invalid("monitor report contains no FIDVR event"));
    }
    let estimate = report.recovery_estimate();
    let op = report_operating_points(report, models)?;
    let model = build_sensitivity_model(net, &op, &estimate, build_controls(capacities, cfg))?;
    let required = uniform_requirement(&model, &estimate, cfg);
    let plan = solve_mitigation_lp(&model, &required)?;
    Ok((model, plan))
}

/// Builds the full sensitivity model at the stalled operating point.
///
/// Areas without a recovery estimate are left out with a warning.
pub fn build_sensitivity_model(
    net: &FeederNetwork,
    op: &[AreaOperatingPoint],
    estimate: &RecoveryEstimate,
    controls: Vec<ControlVariable>,
) -> Result<SensitivityModel> {
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    let mut areas = Vec::new();
    for a in op {
        let Some(e) = estimate.areas.get(&a.area) else {
            continue;
        };
        match compute_time_voltage_derivatives(e.v_l, e.v_recovery, &a.motor1) {
            Ok((x, y)) => {
                d1.push(x);
                d2.push(y);
                areas.push(a.area.clone());
            }
            Err(err) => warn!("area {} excluded from the sensitivity model: {err}", a.area),
        }
    }
    if areas.is_empty() {
        return Err(Error::invalid("no area with a recovery estimate to control"));
    }
    let controls: Vec<ControlVariable> = controls
        .into_iter()
        .filter(|c| op.iter().any(|a| a.area == c.area))
        .collect();
    let red = build_reduced_network(net, op)?;
    let s_full = compute_voltage_control_sensitivities(&red, op, &controls)?;
    let rows: Vec<usize> = areas
        .iter()
        .map(|id| op.iter().position(|a| &a.area == id).unwrap())
        .collect();
    let s = DMatrix::from_fn(rows.len(), controls.len(), |i, j| s_full[(rows[i], j)]);
    let a = assemble_a(&d1, &d2, &s)?;
    Ok(SensitivityModel {
        areas,
        controls,
        d_t1_v: d1,
        d_t2_v: d2,
        s_v_u: s,
        a,
    })
}

/// `Δt = A Δu` per area.
pub fn predict_delta_t(model: &SensitivityModel, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != model.controls.len() {
        return Err(Error::invalid(format!(
            "{} control amounts for {} controls",
            u.len(),
            model.controls.len()
        )));
    }
    Ok((0..model.areas.len())
        .map(|i| (0..u.len()).map(|j| model.a[(i, j)] * u[j]).sum())
        .collect())
}

/// Predicted change of the overall (worst-area) recovery time.
pub fn predict_total_change(model: &SensitivityModel, estimate: &RecoveryEstimate, u: &[f64]) -> Result<f64> {
    let dt = predict_delta_t(model, u)?;
    let mut before = f64::NEG_INFINITY;
    let mut after = f64::NEG_INFINITY;
    for (id, d) in model.areas.iter().zip(&dt) {
        if let Some(e) = estimate.areas.get(id) {
            before = before.max(e.t_total);
            after = after.max(e.t_total + d);
        }
    }
    if !before.is_finite() {
        return Err(Error::invalid("no estimated area in the model"));
    }
    Ok(after - before)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedControl {
    pub area: String,
    pub kind: ControlKind,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationPlan {
    /// Required change per area (non-positive).
    pub required_dt_s: BTreeMap<String, f64>,
    pub controls: Vec<ControlVariable>,
    pub plan: Vec<PlannedControl>,
    pub predicted_dt: BTreeMap<String, f64>,
    /// Control cost of the plan; `None` when infeasible.
    pub objective: Option<f64>,
    pub lp_status: LpStatus,
    /// Per-area change with every control at its bound, reported when the
    /// requirement cannot be met.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_achievable_dt: Option<BTreeMap<String, f64>>,
}

impl MitigationPlan {
    pub fn amounts(&self) -> Vec<f64> {
        self.plan.iter().map(|p| p.amount).collect()
    }

    pub fn total(&self, kind: ControlKind) -> f64 {
        self.plan.iter().filter(|p| p.kind == kind).fold(0.0, |acc, p| acc + p.amount)
    }
}

/// Uniform per-area requirement `−max(0, t_est − t_criterion)`, the same
/// for every modelled area.
pub fn uniform_requirement(model: &SensitivityModel, estimate: &RecoveryEstimate, cfg: &MitigationConfig) -> Vec<f64> {
    let dt = -(estimate.t_total.unwrap_or(0.0) - cfg.t_criterion_s).max(0.0);
    vec![dt; model.areas.len()]
}

/// Per-area requirement that brings every area's estimate down to
/// `max_i t_i + change`, i.e. shortens the overall recovery by `change`
/// without asking already-faster areas for more than that.
pub fn target_requirement(model: &SensitivityModel, estimate: &RecoveryEstimate, change: f64) -> Result<Vec<f64>> {
    let t = |id: &String| {
        estimate
            .areas
            .get(id)
            .map(|e| e.t_total)
            .ok_or_else(|| Error::invalid(format!("area {id} has no recovery estimate")))
    };
    let t_max = estimate
        .t_total
        .ok_or_else(|| Error::invalid("no overall recovery estimate"))?;
    let goal = t_max + change.min(0.0);
    model.areas.iter().map(|id| Ok((goal - t(id)?).min(0.0))).collect()
}

/// Cheapest controls with `A Δu ≤ Δt_required` in every area.
pub fn solve_mitigation_lp(model: &SensitivityModel, required: &[f64]) -> Result<MitigationPlan> {
    if required.len() != model.areas.len() {
        return Err(Error::invalid(format!(
            "{} requirements for {} areas",
            required.len(),
            model.areas.len()
        )));
    }
    if required.iter().any(|&r| !(r <= 0.0)) {
        return Err(Error::invalid("required recovery-time changes must be non-positive"));
    }
    let g: Vec<Vec<f64>> = (0..model.areas.len())
        .map(|i| model.a.row(i).iter().copied().collect())
        .collect();
    let h = required.to_vec();
    let c: Vec<f64> = model.controls.iter().map(|c| c.cost).collect();
    let ub: Vec<f64> = model.controls.iter().map(|c| c.bound).collect();
    let sol = solve_bounded_lp(&c, &g, &h, &ub)?;
    let (u, max_achievable_dt) = match sol.status {
        LpStatus::Optimal => (sol.x.clone(), None),
        LpStatus::Infeasible => {
            let best = predict_delta_t(model, &ub)?;
            let report = model.areas.iter().cloned().zip(best).collect();
            (vec![0.0; ub.len()], Some(report))
        }
    };
    let dt = predict_delta_t(model, &u)?;
    Ok(MitigationPlan {
        required_dt_s: model.areas.iter().cloned().zip(required.iter().copied()).collect(),
        controls: model.controls.clone(),
        plan: model
            .controls
            .iter()
            .zip(&u)
            .map(|(c, &amount)| PlannedControl {
                area: c.area.clone(),
                kind: c.kind,
                amount,
            })
            .collect(),
        predicted_dt: model.areas.iter().cloned().zip(dt).collect(),
        objective: (sol.status == LpStatus::Optimal).then_some(sol.objective),
        lp_status: sol.status,
        max_achievable_dt,
    })
}

/// Simulator actions that carry out `plan` at `time`.
pub fn plan_actions(plan: &[PlannedControl], time: f64) -> Vec<ControlAction> {
    let mut by_area: BTreeMap<&str, ControlAction> = BTreeMap::new();
    for p in plan.iter().filter(|p| p.amount > 0.0) {
        let act = by_area.entry(&p.area).or_insert_with(|| ControlAction {
            time,
            area: p.area.clone(),
            ac_disconnect_kw: 0.0,
            pv_q_kvar: 0.0,
        });
        match p.kind {
            ControlKind::AcDisconnect => act.ac_disconnect_kw += p.amount,
            ControlKind::PvQInject => act.pv_q_kvar += p.amount,
        }
    }
    by_area.into_values().collect()
}

/// Re-simulates `fault` with `plan` actuated `delay` seconds after detection.
pub fn apply_control_plan(
    sim: &Simulator,
    fault: &FaultScenario,
    plan: &[PlannedControl],
    t_detect: f64,
    delay: f64,
) -> Result<SimulationResult> {
    sim.run(Some(fault), &plan_actions(plan, t_detect + delay))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn relay() -> Motor1PhaseParameters {
        Motor1PhaseParameters {
            t_th: 15.0,
            theta1: 0.7,
            theta2: 3.0,
            ..Motor1PhaseParameters::default()
        }
    }

    /// Relay with G_stall = 5 exactly (r = 0.1, x = 0.1 gives 5 − j5).
    fn relay_g5() -> Motor1PhaseParameters {
        let p = relay();
        assert_relative_eq!(p.g_stall(), 5.0, epsilon = 1e-12);
        p
    }

    #[test]
    fn derivative_examples() {
        let (d1, d2) = compute_time_voltage_derivatives(0.7, 0.95, &relay_g5()).unwrap();
        assert_relative_eq!(d1, -17.143, epsilon = 1e-3);
        assert_relative_eq!(d2, -45.38, epsilon = 1e-2);
    }

    #[test]
    fn derivatives_match_central_differences() {
        use crate::monitor::{estimate_t1, estimate_t2};
        let p = relay_g5();
        for v in [0.55, 0.7, 0.85] {
            let h = 1e-5;
            let (d1, d2) = compute_time_voltage_derivatives(v, 0.95, &p).unwrap();
            let f1 = (estimate_t1(v + h, &p).unwrap() - estimate_t1(v - h, &p).unwrap()) / (2.0 * h);
            let f2 = (estimate_t2(v + h, 0.95, &p).unwrap() - estimate_t2(v - h, 0.95, &p).unwrap()) / (2.0 * h);
            assert_relative_eq!(d1, f1, max_relative = 1e-4);
            assert_relative_eq!(d2, f2, max_relative = 1e-4);
            assert!(d1 < 0.0 && d2 < 0.0);
        }
    }

    #[test]
    fn derivative_pole_is_an_error() {
        // t2 denominator vanishes: (v² + 0.95²)·5 = 3.7
        let v = (3.7f64 / 5.0 - 0.9025).max(0.0).sqrt();
        assert!(compute_time_voltage_derivatives(v, 0.95, &relay_g5()).is_err());
    }

    #[test]
    fn assemble_scales_and_clamps() {
        let s = DMatrix::from_row_slice(2, 2, &[0.01, 0.002, -0.001, 0.004]);
        let a = assemble_a(&[-4.0, -1.0], &[-6.0, -2.0], &s).unwrap();
        assert_relative_eq!(a[(0, 0)], -0.1, epsilon = 1e-15);
        assert_relative_eq!(a[(0, 1)], -0.02, epsilon = 1e-15);
        assert_eq!(a[(1, 0)], 0.0);
        assert_relative_eq!(a[(1, 1)], -0.012, epsilon = 1e-15);
        assert!(assemble_a(&[-1.0], &[-1.0, -1.0], &s).is_err());
    }

    fn toy_model() -> SensitivityModel {
        let a = DMatrix::from_row_slice(1, 2, &[-0.02, -0.005]);
        SensitivityModel {
            areas: vec!["A1".into()],
            controls: vec![
                ControlVariable { area: "A1".into(), kind: ControlKind::AcDisconnect, bound: 120.0, cost: 1.0 },
                ControlVariable { area: "A1".into(), kind: ControlKind::PvQInject, bound: 120.0, cost: 1.0 },
            ],
            d_t1_v: vec![-1.0],
            d_t2_v: vec![-1.0],
            s_v_u: a.clone() / -2.0,
            a,
        }
    }

    #[test]
    fn plan_on_toy_model() {
        let m = toy_model();
        let plan = solve_mitigation_lp(&m, &[-2.0]).unwrap();
        assert_eq!(plan.lp_status, LpStatus::Optimal);
        assert_relative_eq!(plan.plan[0].amount, 100.0, epsilon = 1e-9);
        assert_relative_eq!(plan.predicted_dt["A1"], -2.0, epsilon = 1e-9);

        let none = solve_mitigation_lp(&m, &[0.0]).unwrap();
        assert!(none.amounts().iter().all(|&u| u == 0.0));

        let inf = solve_mitigation_lp(&m, &[-10.0]).unwrap();
        assert_eq!(inf.lp_status, LpStatus::Infeasible);
        assert_relative_eq!(inf.max_achievable_dt.unwrap()["A1"], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn prediction_is_linear() {
        let m = toy_model();
        let a = predict_delta_t(&m, &[10.0, 4.0]).unwrap();
        let b = predict_delta_t(&m, &[20.0, 8.0]).unwrap();
        assert_relative_eq!(b[0], 2.0 * a[0], epsilon = 1e-15);
        assert_eq!(predict_delta_t(&m, &[0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn actions_group_by_area() {
        let plan = vec![
            PlannedControl { area: "A2".into(), kind: ControlKind::AcDisconnect, amount: 30.0 },
            PlannedControl { area: "A2".into(), kind: ControlKind::PvQInject, amount: 12.0 },
            PlannedControl { area: "A1".into(), kind: ControlKind::AcDisconnect, amount: 0.0 },
        ];
        let acts = plan_actions(&plan, 2.5);
        assert_eq!(acts.len(), 1);
        assert_eq!(acts[0].ac_disconnect_kw, 30.0);
        assert_eq!(acts[0].pv_q_kvar, 12.0);
        assert_eq!(acts[0].time, 2.5);
    }
}
