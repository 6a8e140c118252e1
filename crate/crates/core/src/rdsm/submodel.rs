use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BusId, BusLoad};
use crate::load::{
    aggregate_load_injection, electrical_torque, kw_to_pu, motor3_step, slip_for_power, step_thermal_relay,
    update_stall_state, LoadAreaState, LoadComposition, LoadModel, Motor1Mode, Motor1PhaseParameters,
    Motor3PhaseParameters, PvParameters, ZipParameters,
};

/// Equivalent feeder between the measurement point and the aggregate load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalentFeeder {
    pub r_f: f64,
    pub x_f: f64,
    #[serde(default)]
    pub b_f: f64,
    /// Off-nominal tap; the reference system has none.
    #[serde(default = "unit_tap")]
    pub n_r: f64,
}

fn unit_tap() -> f64 {
    1.0
}

impl EquivalentFeeder {
    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r_f, self.x_f)
    }
}

/// Parameters of one area's reduced model: an equivalent feeder feeding a
/// single composite load of `p_load_kw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubModelParameters {
    pub area: String,
    pub root: BusId,
    pub p_load_kw: f64,
    pub f_s: f64,
    #[serde(default)]
    pub f_el: f64,
    pub f_m1: f64,
    pub f_m3: f64,
    #[serde(default)]
    pub f_pv: f64,
    pub feeder: EquivalentFeeder,
    #[serde(default)]
    pub zip: ZipParameters,
    #[serde(default)]
    pub motor1: Motor1PhaseParameters,
    #[serde(default)]
    pub motor3: Motor3PhaseParameters,
    #[serde(default)]
    pub pv: PvParameters,
}

impl SubModelParameters {
    pub fn load_model(&self) -> LoadModel {
        let mut m = LoadModel::new(LoadComposition {
            p_total_kw: self.p_load_kw,
            f_s: self.f_s,
            f_el: self.f_el,
            f_m1: self.f_m1,
            f_m3: self.f_m3,
            f_pv: self.f_pv,
        });
        m.zip = self.zip;
        m.motor1 = self.motor1;
        m.motor3 = self.motor3;
        m.pv = self.pv;
        m
    }

    pub fn validate(&self) -> Result<()> {
        for f in [self.f_s, self.f_el, self.f_m1, self.f_m3, self.f_pv] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(format!("area {}: fractions must lie in [0, 1]", self.area)));
            }
        }
        if self.f_s + self.f_el + self.f_m1 + self.f_m3 > 1.0 + 1e-6 {
            return Err(Error::invalid(format!("area {}: load fractions exceed 1", self.area)));
        }
        if !(self.p_load_kw >= 0.0) {
            return Err(Error::invalid(format!("area {}: negative load", self.area)));
        }
        self.load_model().validate()
    }

    pub fn ac_kw(&self) -> f64 {
        self.p_load_kw * self.f_m1
    }
}

/// Terminal behaviour of the sub-model along a played-back root voltage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubModelTrace {
    /// Complex power drawn at the root, system per unit.
    pub s: Vec<Complex64>,
    /// Load-point voltage magnitude.
    pub v_load: Vec<f64>,
    /// Connected stalled share of the A/C block.
    pub stalled: Vec<f64>,
}

struct Playback {
    model: LoadModel,
    z: Complex64,
    y_sh: Complex64,
    scale: f64,
    pq_low: Option<f64>,
}

impl Playback {
    fn load(&self, state: &LoadAreaState) -> BusLoad {
        aggregate_load_injection(&self.model, state, self.scale)
    }

    /// Load-point voltage for a given root voltage, by fixed-point iteration
    /// on `V_L = V_root − z I(V_L)`.
    fn solve(&self, v_root: Complex64, load: &BusLoad, guess: Complex64) -> Complex64 {
        if self.z.norm() == 0.0 {
            return v_root;
        }
        // admittance part handled exactly: V_L (1 + z Y) = V_root − z I_nl
        let a = Complex64::new(1.0, 0.0) + self.z * load.admittance;
        let nl = BusLoad {
            admittance: Complex64::new(0.0, 0.0),
            ..*load
        };
        if nl.power == Complex64::new(0.0, 0.0) && nl.current == Complex64::new(0.0, 0.0) {
            return v_root / a;
        }
        let mut v = guess;
        for _ in 0..50 {
            let next = (v_root - self.z * nl.current_at(v, self.pq_low)) / a;
            let step = (next - v).norm();
            v = next;
            if step < 1e-12 {
                break;
            }
        }
        v
    }
}

/// Plays the recorded root voltage `boundary` (one sample every `dt`)
/// through the reduced model and returns the power drawn at the root.
///
/// The model starts in steady state at the first boundary sample.
pub fn simulate_submodel(
    params: &SubModelParameters,
    boundary: &[Complex64],
    dt: f64,
    base_mva: f64,
    pq_low_voltage: Option<f64>,
) -> Result<SubModelTrace> {
    if boundary.is_empty() {
        return Ok(SubModelTrace::default());
    }
    let n_r = if params.feeder.n_r > 0.0 { params.feeder.n_r } else { 1.0 };
    let pb = Playback {
        model: params.load_model(),
        z: params.feeder.impedance(),
        y_sh: Complex64::new(0.0, 0.5 * params.feeder.b_f),
        scale: kw_to_pu(base_mva),
        pq_low: pq_low_voltage,
    };
    let m1_mode = if pb.model.composition.ac_kw() > 0.0 {
        Motor1Mode::Running
    } else {
        Motor1Mode::NeverStalled
    };
    let mut state = LoadAreaState {
        motor1_mode: m1_mode,
        ..LoadAreaState::running(0.0)
    };
    let has_m3 = pb.model.composition.f_m3 > 0.0;
    let v0 = boundary[0] / n_r;
    let mut v_l = v0;
    for _ in 0..100 {
        if has_m3 {
            state.slip3 = slip_for_power(pb.model.motor3.loading_factor, v_l.norm(), &pb.model.motor3)?;
        }
        let next = pb.solve(v0, &pb.load(&state), v_l);
        let step = (next - v_l).norm();
        v_l = next;
        if step < 1e-13 {
            break;
        }
    }
    let t0 = if has_m3 {
        let m3 = &pb.model.motor3;
        electrical_torque(state.slip3, v_l.norm(), m3) / (1.0 - state.slip3).powf(m3.load_torque_exponent)
    } else {
        0.0
    };

    let mut trace = SubModelTrace {
        s: Vec::with_capacity(boundary.len()),
        v_load: Vec::with_capacity(boundary.len()),
        stalled: Vec::with_capacity(boundary.len()),
    };
    let ac = pb.model.composition.ac_kw();
    for &vb in boundary {
        let vr = vb / n_r;
        let load = pb.load(&state);
        v_l = pb.solve(vr, &load, v_l);
        let i = load.current_at(v_l, pb.pq_low) + pb.y_sh * vr;
        trace.s.push(vb * (i / n_r).conj());
        let vm = v_l.norm();
        trace.v_load.push(vm);
        trace.stalled.push(if state.is_stalled() && ac > 0.0 { state.f_th } else { 0.0 });

        let m1 = &pb.model.motor1;
        step_thermal_relay(&mut state, vm, dt, m1);
        update_stall_state(&mut state, vm, dt, m1);
        if has_m3 {
            state.slip3 = motor3_step(state.slip3, vm, t0, dt, &pb.model.motor3);
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn sample_params() -> SubModelParameters {
        SubModelParameters {
            area: "A5".into(),
            root: 709,
            p_load_kw: 684.0,
            f_s: 0.47,
            f_el: 0.0,
            f_m1: 0.53,
            f_m3: 0.0,
            f_pv: 0.0,
            feeder: EquivalentFeeder { r_f: 0.02, x_f: 0.01, b_f: 0.0, n_r: 1.0 },
            zip: ZipParameters::default(),
            motor1: Motor1PhaseParameters {
                r_stall: 0.072,
                x_stall: 0.091,
                t_th: 13.62,
                theta1: 0.739,
                theta2: 2.615,
                ..Motor1PhaseParameters::default()
            },
            motor3: Motor3PhaseParameters::default(),
            pv: PvParameters::default(),
        }
    }

    fn sag(n: usize, dt: f64, depth: f64, on: f64, off: f64, after: f64) -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                let m = if t < on {
                    1.0
                } else if t < off {
                    depth
                } else {
                    after
                };
                Complex64::new(m, 0.0)
            })
            .collect()
    }

    #[test]
    fn constant_boundary_is_steady() {
        let mut p = sample_params();
        p.f_m3 = 0.2;
        p.f_s = 0.27;
        let b = vec![Complex64::new(1.0, 0.0); 2000];
        let tr = simulate_submodel(&p, &b, 0.01, 2.5, Some(0.7)).unwrap();
        let s0 = tr.s[0];
        for s in &tr.s {
            assert!((s - s0).norm() < 1e-6);
        }
        // demand equals the composition setpoint up to the feeder losses
        let p_kw = s0.re * 2500.0;
        assert!((p_kw - 684.0).abs() / 684.0 < 0.02, "{p_kw}");
    }

    #[test]
    fn no_ac_means_no_stall() {
        let mut p = sample_params();
        p.f_m1 = 0.0;
        p.f_s = 1.0;
        let b = sag(1500, 0.01, 0.3, 1.0, 1.1, 0.95);
        let tr = simulate_submodel(&p, &b, 0.01, 2.5, Some(0.7)).unwrap();
        assert!(tr.stalled.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stall_then_trip_signature() {
        let p = sample_params();
        let b = sag(3000, 0.01, 0.3, 1.0, 1.08, 0.85);
        let tr = simulate_submodel(&p, &b, 0.01, 2.5, Some(0.7)).unwrap();
        let q_pre = tr.s[50].im;
        let q_stall = tr.s[150].im;
        assert!(q_stall > 2.0 * q_pre, "{q_pre} -> {q_stall}");
        // reactive demand ramps down as the relays trip
        let q_end = tr.s[2999].im;
        assert!(q_end < 0.5 * q_stall);
        assert_relative_eq!(tr.stalled[2999], 0.0);
    }
}
