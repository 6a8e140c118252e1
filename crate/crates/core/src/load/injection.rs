use num_complex::Complex64;

use super::{motor3_admittance, LoadAreaState, LoadModel, Motor1Mode};
use crate::grid::BusLoad;

/// Converts kW (or kvar) into per-unit power on a system base in MVA.
pub fn kw_to_pu(base_mva: f64) -> f64 {
    1.0 / (1000.0 * base_mva)
}

/// Three-phase motor base in kW: rated demand divided by the loading factor.
pub fn motor3_base_kw(model: &LoadModel) -> f64 {
    model.composition.p_total_kw * model.composition.f_m3 / model.motor3.loading_factor
}

/// Network demand of one composite load in system per unit.
///
/// Running A/C, electronic load and PV are constant power; the static load is
/// split into its ZIP parts plus the shunt capacitor; a stalled A/C block and
/// the three-phase motor appear as admittances. `scale` converts kW to
/// system per unit.
pub fn aggregate_load_injection(model: &LoadModel, state: &LoadAreaState, scale: f64) -> BusLoad {
    let c = &model.composition;
    let mut load = BusLoad::default();

    let p_s = c.p_total_kw * c.f_s * scale;
    if p_s > 0.0 {
        let z = &model.zip;
        let q_s = p_s * z.q_ratio;
        let part = |fp: f64, fq: f64| Complex64::new(fp * p_s, fq * q_s);
        load.admittance += part(z.p_z0, z.q_z0).conj() + Complex64::new(0.0, z.q_sh0 * p_s);
        load.current += part(z.p_i0, z.q_i0);
        load.power += part(z.p_p0, z.q_p0);
    }

    let p_el = c.p_total_kw * c.f_el * scale;
    load.power += Complex64::new(p_el, p_el * model.electronic_q_ratio);

    let ac_base = c.p_total_kw * c.f_m1 * scale * state.ac_connected;
    if ac_base > 0.0 {
        let m1 = &model.motor1;
        match state.motor1_mode {
            Motor1Mode::Stalled => load.admittance += m1.stall_admittance() * (state.f_th * ac_base),
            Motor1Mode::Running | Motor1Mode::NeverStalled => {
                load.power += Complex64::new(m1.p_nom, m1.q_nom) * ac_base
            }
        }
    }

    let m3_base = motor3_base_kw(model) * scale;
    if m3_base > 0.0 {
        load.admittance += motor3_admittance(state.slip3, &model.motor3) * m3_base;
    }

    let p_pv = c.pv_kw() * scale;
    load.power -= Complex64::new(p_pv, state.pv_q_kvar * scale);
    load
}
