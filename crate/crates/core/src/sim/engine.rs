use std::collections::HashSet;

use log::warn;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{draw_node_fractions, AreaSeries, AreaSpec, ControlAction, FaultScenario, SimConfig, SimulationResult};
use crate::error::{Error, Result};
use crate::grid::{BusId, BusLoad, FeederNetwork, PowerFlowOptions, TreeSolver};
use crate::load::{
    aggregate_load_injection, electrical_torque, kw_to_pu, motor3_step, slip_for_power, step_thermal_relay,
    update_stall_state, LoadAreaState, LoadModel, Motor1Mode,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const AC_UNITS_PER_NODE: usize = 10;

/// One composite load connected at a bus, with its equilibrium state.
#[derive(Debug, Clone)]
pub struct LoadPoint {
    pub bus: BusId,
    pub bus_index: usize,
    pub area: usize,
    pub model: LoadModel,
    /// Load torque coefficient of the three-phase motor.
    pub t0: f64,
    pub initial: LoadAreaState,
}

impl LoadPoint {
    fn ac_kw(&self) -> f64 {
        self.model.composition.ac_kw()
    }
}

#[derive(Debug, Clone)]
struct AreaRuntime {
    spec: AreaSpec,
    root_index: usize,
    /// (child bus index, series admittance, half line charging) per entry.
    entries: Vec<(usize, Complex64, f64)>,
    points: Vec<usize>,
    /// Load points sitting on the root bus itself.
    root_points: Vec<usize>,
}

/// Bus voltages and per-area quantities at a steady operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadySnapshot {
    pub v: Vec<Complex64>,
    pub area_current: Vec<Complex64>,
    /// Load-weighted mean voltage of each area's load buses.
    pub area_v_agg: Vec<Complex64>,
}

/// A feeder with its load areas, initialised to a steady operating point.
/// Runs are independent, so one simulator can serve many scenarios.
#[derive(Debug, Clone)]
pub struct Simulator {
    net: FeederNetwork,
    solver: TreeSolver,
    areas: Vec<AreaRuntime>,
    points: Vec<LoadPoint>,
    config: SimConfig,
    initial_voltages: Vec<Complex64>,
    scale: f64,
    monitored: Vec<usize>,
}

impl Simulator {
    pub fn new(net: &FeederNetwork, areas: &[AreaSpec], config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut seen_ids = HashSet::new();
        let mut claimed = vec![None::<usize>; net.len()];
        let mut runtimes = Vec::with_capacity(areas.len());
        let mut points = Vec::new();

        for (a, spec) in areas.iter().enumerate() {
            spec.load.validate().map_err(|e| Error::invalid(format!("area {}: {e}", spec.id)))?;
            if !seen_ids.insert(spec.id.clone()) {
                return Err(Error::invalid(format!("duplicate area id {}", spec.id)));
            }
            let root = net.require_bus(spec.root)?;
            let mut members = Vec::new();
            if spec.include_root {
                members.push(root);
            }
            let mut entries = Vec::new();
            for &e in &spec.entries {
                let ei = net.require_bus(e)?;
                let (parent, k) = net
                    .parent(ei)
                    .filter(|(p, _)| *p == root)
                    .ok_or_else(|| {
                        Error::invalid(format!("area {}: bus {e} is not a child of root {}", spec.id, spec.root))
                    })?;
                debug_assert_eq!(parent, root);
                let br = &net.branches()[k];
                entries.push((ei, br.impedance.inv(), 0.5 * br.shunt_b));
                members.extend(net.subtree(ei));
            }
            if members.is_empty() {
                return Err(Error::invalid(format!("area {} has no member buses", spec.id)));
            }
            for &m in &members {
                if let Some(other) = claimed[m] {
                    return Err(Error::invalid(format!(
                        "bus {} belongs to both {} and {}",
                        net.buses()[m].id,
                        areas[other].id,
                        spec.id
                    )));
                }
                claimed[m] = Some(a);
            }

            let c = spec.load.composition;
            let weights: Vec<f64> = spec.nodes.iter().map(|n| n.p_kw).collect();
            let fractions = draw_node_fractions([c.f_s, c.f_el, c.f_m1, c.f_m3], &weights, config.heterogeneity, &mut rng);
            let mut area_points = Vec::new();
            let mut root_points = Vec::new();
            for (node, f) in spec.nodes.iter().zip(fractions) {
                let bi = net.require_bus(node.bus)?;
                if claimed[bi] != Some(a) {
                    return Err(Error::invalid(format!(
                        "area {}: load bus {} lies outside the area",
                        spec.id, node.bus
                    )));
                }
                if !(node.p_kw >= 0.0) {
                    return Err(Error::invalid(format!("area {}: negative load at bus {}", spec.id, node.bus)));
                }
                let mut model = spec.load;
                model.composition.p_total_kw = node.p_kw;
                model.composition.f_s = f[0];
                model.composition.f_el = f[1];
                model.composition.f_m1 = f[2];
                model.composition.f_m3 = f[3];
                let mode = if model.composition.ac_kw() > 0.0 {
                    Motor1Mode::Running
                } else {
                    Motor1Mode::NeverStalled
                };
                if bi == root {
                    root_points.push(points.len());
                }
                area_points.push(points.len());
                points.push(LoadPoint {
                    bus: node.bus,
                    bus_index: bi,
                    area: a,
                    model,
                    t0: 0.0,
                    initial: LoadAreaState {
                        motor1_mode: mode,
                        ..LoadAreaState::running(0.0)
                    },
                });
            }
            runtimes.push(AreaRuntime {
                spec: spec.clone(),
                root_index: root,
                entries,
                points: area_points,
                root_points,
            });
        }

        let mut monitored: Vec<usize> = runtimes.iter().map(|a| a.root_index).collect();
        monitored.sort_unstable();
        monitored.dedup();

        let mut sim = Simulator {
            net: net.clone(),
            solver: TreeSolver::new(net),
            areas: runtimes,
            points,
            config,
            initial_voltages: vec![net.source().emf; net.len()],
            scale: kw_to_pu(net.base_mva()),
            monitored,
        };
        sim.initialise()?;
        Ok(sim)
    }

    /// Finds the steady state: three-phase motors draw their rated power at
    /// the solved voltage, and the load torque is set to hold that slip.
    fn initialise(&mut self) -> Result<()> {
        let opts = self.pf_options();
        let mut v = self.initial_voltages.clone();
        let mut converged = false;
        for _ in 0..100 {
            for p in self.points.iter_mut() {
                if p.model.composition.f_m3 > 0.0 {
                    let vm = v[p.bus_index].norm();
                    p.initial.slip3 = slip_for_power(p.model.motor3.loading_factor, vm, &p.model.motor3)?;
                }
            }
            let states: Vec<LoadAreaState> = self.points.iter().map(|p| p.initial).collect();
            let loads = self.bus_loads(&states);
            let next = self.solver.solve(&loads, &opts, Some(&v))?.voltages;
            let step = next.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            v = next;
            if step < 1e-13 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Diverged {
                iterations: 100,
                last_step: f64::NAN,
            });
        }
        for p in self.points.iter_mut() {
            if p.model.composition.f_m3 > 0.0 {
                let m3 = &p.model.motor3;
                let s = p.initial.slip3;
                p.t0 = electrical_torque(s, v[p.bus_index].norm(), m3) / (1.0 - s).powf(m3.load_torque_exponent);
            }
        }
        self.initial_voltages = v;
        Ok(())
    }

    fn pf_options(&self) -> PowerFlowOptions {
        PowerFlowOptions {
            max_iterations: 200,
            tolerance: 1e-11,
            pq_low_voltage: (self.config.pq_low_voltage > 0.0).then_some(self.config.pq_low_voltage),
        }
    }

    fn point_load(&self, p: &LoadPoint, s: &LoadAreaState) -> BusLoad {
        aggregate_load_injection(&p.model, s, self.scale)
    }

    fn bus_loads(&self, states: &[LoadAreaState]) -> Vec<BusLoad> {
        let mut loads = vec![BusLoad::default(); self.net.len()];
        for (p, s) in self.points.iter().zip(states) {
            loads[p.bus_index] += self.point_load(p, s);
        }
        loads
    }

    pub fn network(&self) -> &FeederNetwork {
        &self.net
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn points(&self) -> &[LoadPoint] {
        &self.points
    }

    pub fn area_specs(&self) -> impl Iterator<Item = &AreaSpec> {
        self.areas.iter().map(|a| &a.spec)
    }

    pub fn area_index(&self, id: &str) -> Option<usize> {
        self.areas.iter().position(|a| a.spec.id == id)
    }

    /// Nominal A/C demand of an area in kW, as drawn per node.
    pub fn area_ac_kw(&self, area: usize) -> f64 {
        self.areas[area].points.iter().map(|&k| self.points[k].ac_kw()).sum()
    }

    /// Reactive capability of an area's PV in kvar.
    pub fn area_pv_q_max(&self, area: usize) -> f64 {
        self.areas[area].points.iter().map(|&k| self.points[k].model.pv_q_max_kvar()).sum()
    }

    pub fn initial_voltages(&self) -> &[Complex64] {
        &self.initial_voltages
    }

    /// Bus indices of the measurement points, sorted.
    pub fn monitored_buses(&self) -> &[usize] {
        &self.monitored
    }

    /// Steady operating point with every load scaled by `load_scale` and
    /// all dynamic states at their initial values.
    pub fn steady_state(&self, load_scale: f64) -> Result<SteadySnapshot> {
        let states: Vec<LoadAreaState> = self.points.iter().map(|p| p.initial).collect();
        let loads: Vec<BusLoad> = self.bus_loads(&states).into_iter().map(|l| l * load_scale).collect();
        let v = self.solver.solve(&loads, &self.pf_options(), Some(&self.initial_voltages))?.voltages;
        let mut snap = SteadySnapshot {
            area_current: Vec::new(),
            area_v_agg: Vec::new(),
            v: Vec::new(),
        };
        for ar in &self.areas {
            // root loads scale like every other load
            let mut i = ZERO;
            let vr = v[ar.root_index];
            for &(c, y, half_b) in &ar.entries {
                i += (vr - v[c]) * y + Complex64::new(0.0, half_b) * vr;
            }
            for &k in &ar.root_points {
                i += (self.point_load(&self.points[k], &states[k]) * load_scale).current_at(vr, None);
            }
            snap.area_current.push(i);
            let (mut num, mut den) = (ZERO, 0.0);
            for &k in &ar.points {
                let w = self.points[k].model.composition.p_total_kw;
                num += v[self.points[k].bus_index] * w;
                den += w;
            }
            snap.area_v_agg.push(if den > 0.0 { num / den } else { vr });
        }
        snap.v = v;
        Ok(snap)
    }

    pub fn area_root_index(&self, area: usize) -> usize {
        self.areas[area].root_index
    }

    /// Current flowing from the area root into the area.
    fn area_current(&self, area: &AreaRuntime, v: &[Complex64], states: &[LoadAreaState]) -> Complex64 {
        let vr = v[area.root_index];
        let mut i = ZERO;
        for &(c, y, half_b) in &area.entries {
            i += (vr - v[c]) * y + Complex64::new(0.0, half_b) * vr;
        }
        let pq_low = self.pf_options().pq_low_voltage;
        for &k in &area.root_points {
            i += self.point_load(&self.points[k], &states[k]).current_at(vr, pq_low);
        }
        i
    }

    fn apply_control(&self, action: &ControlAction, states: &mut [LoadAreaState], rng: &mut ChaCha8Rng) -> Result<()> {
        let a = self
            .area_index(&action.area)
            .ok_or_else(|| Error::invalid(format!("control for unknown area {}", action.area)))?;
        let area = &self.areas[a];

        if action.ac_disconnect_kw > 0.0 {
            // equal A/C units per node, disconnected in random order
            let mut units = Vec::new();
            let mut available = 0.0;
            for &k in &area.points {
                let kw = self.points[k].ac_kw() * states[k].ac_connected;
                if kw > 0.0 {
                    available += kw;
                    units.extend(std::iter::repeat_n((k, kw / AC_UNITS_PER_NODE as f64), AC_UNITS_PER_NODE));
                }
            }
            let mut remaining = action.ac_disconnect_kw;
            if remaining > available + 1e-9 {
                warn!(
                    "area {}: requested {:.1} kW of A/C disconnection, only {:.1} kW connected",
                    area.spec.id, remaining, available
                );
                remaining = available;
            }
            units.shuffle(rng);
            for (k, size) in units {
                if remaining <= 1e-12 {
                    break;
                }
                let cut = size.min(remaining);
                remaining -= cut;
                let node_kw = self.points[k].ac_kw();
                states[k].ac_connected = (states[k].ac_connected - cut / node_kw).max(0.0);
            }
        }

        if action.pv_q_kvar != 0.0 {
            let rating: f64 = area.points.iter().map(|&k| self.points[k].model.composition.pv_kw()).sum();
            if rating <= 0.0 {
                warn!("area {}: no PV available for reactive support", area.spec.id);
            } else {
                let mut capped = false;
                for &k in &area.points {
                    let p = &self.points[k];
                    let share = action.pv_q_kvar * p.model.composition.pv_kw() / rating;
                    let cap = p.model.pv_q_max_kvar();
                    if share > cap + 1e-9 {
                        capped = true;
                    }
                    states[k].pv_q_kvar = share.min(cap);
                }
                if capped {
                    warn!("area {}: PV reactive command capped at inverter limit", area.spec.id);
                }
            }
        }
        Ok(())
    }

    /// Runs one scenario. `fault` may be `None` for an undisturbed run;
    /// `controls` are applied at the first step at or after their time.
    pub fn run(&self, fault: Option<&FaultScenario>, controls: &[ControlAction]) -> Result<SimulationResult> {
        let cfg = &self.config;
        let dt = cfg.dt_s;
        let stride = cfg.report_stride()?;
        let steps = cfg.steps();
        let opts = self.pf_options();

        let (fault_index, k_on, k_off) = match fault {
            Some(f) => {
                f.validate()?;
                let bi = self.net.require_bus(f.bus)?;
                let on = (f.start / dt).round() as usize;
                let off = on + ((f.duration / dt).round() as usize).max(1);
                (Some(bi), on, off)
            }
            None => (None, usize::MAX, usize::MAX),
        };
        let mut pending: Vec<&ControlAction> = controls.iter().collect();
        pending.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut next_control = 0;
        let mut control_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c0de);

        let mut result = SimulationResult::new(cfg.seed, dt, fault, self.net.base_mva(), cfg.v_recovery);
        result.areas = self
            .areas
            .iter()
            .enumerate()
            .map(|(a, ar)| AreaSeries {
                id: ar.spec.id.clone(),
                root: ar.spec.root,
                v: Vec::new(),
                i: Vec::new(),
                stalled_kw: Vec::new(),
                ac_kw: self.area_ac_kw(a),
            })
            .collect();
        if cfg.record_buses {
            result.bus_ids = self.net.buses().iter().map(|b| b.id).collect();
        }

        let mut states: Vec<LoadAreaState> = self.points.iter().map(|p| p.initial).collect();
        let mut v = self.initial_voltages.clone();
        result.min_root_voltage.reserve(steps + 1);

        for k in 0..=steps {
            let t = k as f64 * dt;
            while next_control < pending.len() && pending[next_control].time <= t + 1e-9 {
                self.apply_control(pending[next_control], &mut states, &mut control_rng)?;
                next_control += 1;
            }

            let mut loads = self.bus_loads(&states);
            if let Some(bi) = fault_index {
                if k >= k_on && k < k_off {
                    loads[bi].admittance += fault.unwrap().fault_shunt;
                }
            }
            match self.solver.solve(&loads, &opts, Some(&v)) {
                Ok(sol) => v = sol.voltages,
                Err(e) => {
                    result.collapsed = Some(format!("network solve failed at t = {t:.3} s: {e}"));
                    break;
                }
            }

            let vmin = self.monitored.iter().map(|&b| v[b].norm()).fold(f64::INFINITY, f64::min);
            result.min_root_voltage.push(vmin);

            if k % stride == 0 {
                result.times.push(t);
                for (ar, series) in self.areas.iter().zip(result.areas.iter_mut()) {
                    series.v.push(v[ar.root_index]);
                    series.i.push(self.area_current(ar, &v, &states));
                    let stalled: f64 = ar
                        .points
                        .iter()
                        .filter(|&&p| states[p].is_stalled())
                        .map(|&p| self.points[p].ac_kw() * states[p].ac_connected * states[p].f_th)
                        .sum();
                    series.stalled_kw.push(stalled);
                }
                if cfg.record_buses {
                    result.bus_voltages.push(v.iter().map(|x| x.norm()).collect());
                }
            }

            for (p, s) in self.points.iter().zip(states.iter_mut()) {
                let vm = v[p.bus_index].norm();
                let m1 = &p.model.motor1;
                step_thermal_relay(s, vm, dt, m1);
                update_stall_state(s, vm, dt, m1);
                if p.model.composition.f_m3 > 0.0 {
                    s.slip3 = motor3_step(s.slip3, vm, p.t0, dt, &p.model.motor3);
                }
            }
        }
        Ok(result)
    }
}
